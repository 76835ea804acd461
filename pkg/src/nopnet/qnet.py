"""Position-scoring Q-network and the Double-Q target machinery.

The network emits one score per token position (insert-NOP-here value); the
append slot N reuses the score at N-1, since the time-distributed head
produces exactly N outputs. Two head modes share identical parameters and
identical argmax behavior: "softmax" normalizes scores over positions (the
architecture as published), "linear" leaves them raw (the conventional
Q-value reading).
"""

import numpy as np

from . import layers
from .errors import ContractError, InputError
from .tensor import ParamSet, load_checkpoint, save_checkpoint

ARCH_TAG = "qnet-3-10"
HEAD_MODES = ("softmax", "linear")


def _init_params(vocab_size, embedding_dim, n_filters, filter_width, rng):
    params = ParamSet()
    params.add("embedding",
               rng.uniform(-0.05, 0.05, size=(vocab_size, embedding_dim)))
    limit = np.sqrt(1.0 / (filter_width * embedding_dim))
    params.add("conv",
               rng.uniform(-limit, limit,
                           size=(n_filters, filter_width, embedding_dim)))
    limit = np.sqrt(1.0 / n_filters)
    params.add("dense", rng.uniform(-limit, limit, size=(n_filters, 1)))
    return params


class QNetwork:
    def __init__(self, vocab_size, embedding_dim=4, n_filters=10, filter_width=3,
                 head="softmax", seed=0, params=None):
        if head not in HEAD_MODES:
            raise ContractError(f"head must be one of {HEAD_MODES}, got {head!r}")
        self.vocab_size = vocab_size
        self.embedding_dim = embedding_dim
        self.n_filters = n_filters
        self.filter_width = filter_width
        self.head = head
        if params is None:
            params = _init_params(vocab_size, embedding_dim, n_filters,
                                  filter_width, np.random.default_rng(seed))
        self.params = params

    def forward(self, tokens):
        """Scores for the N token positions; returns (q (N,), cache)."""
        ids = np.asarray(tokens, dtype=np.int64)
        if len(ids) == 0:
            raise InputError("Q-network input must be nonempty")
        emb = layers.embedding_forward(ids, self.params["embedding"].value)
        conv = layers.conv1d_forward(emb, self.params["conv"].value)
        raw = layers.dense_forward(conv, self.params["dense"].value)[:, 0]
        q = layers.softmax(raw) if self.head == "softmax" else raw
        cache = {"ids": ids, "emb": emb, "conv": conv, "q": q}
        return q, cache

    def position_scores(self, tokens):
        """Scores over all N+1 insertion slots (append slot aliases N-1)."""
        q, _ = self.forward(tokens)
        return np.append(q, q[-1])

    def backward(self, cache, dq):
        """Accumulate gradients given dLoss/dq over the N positions."""
        if self.head == "softmax":
            draw = layers.softmax_backward(cache["q"], dq)
        else:
            draw = np.asarray(dq, dtype=np.float64)
        dconv, dwd = layers.dense_backward(cache["conv"],
                                           self.params["dense"].value,
                                           draw[:, None])
        self.params["dense"].grad += dwd
        demb, dwc = layers.conv1d_backward(cache["emb"],
                                           self.params["conv"].value, dconv)
        self.params["conv"].grad += dwc
        self.params["embedding"].grad += layers.embedding_backward(
            cache["ids"], demb, self.vocab_size)

    def save(self, path, seed=None):
        save_checkpoint(path, self.params, {
            "arch": ARCH_TAG,
            "V": self.vocab_size,
            "E": self.embedding_dim,
            "n_filters": self.n_filters,
            "filter_width": self.filter_width,
            "head": self.head,
            "seed": seed,
        })

    @classmethod
    def load(cls, path):
        params, meta = load_checkpoint(path)
        if meta.get("arch") != ARCH_TAG:
            raise InputError(f"checkpoint arch {meta.get('arch')!r} != {ARCH_TAG!r}")
        return cls(meta["V"], meta["E"], meta["n_filters"], meta["filter_width"],
                   head=meta["head"], params=params)


def q_values(net, tokens, insert_mask):
    """Slot scores with masked slots forced to -inf."""
    insert_mask = np.asarray(insert_mask, dtype=bool)
    if len(insert_mask) != len(tokens) + 1:
        raise ContractError(f"mask length {len(insert_mask)} != N+1")
    if not insert_mask.any():
        raise ContractError("every insertion slot is masked")
    scores = net.position_scores(tokens)
    scores[~insert_mask] = -np.inf
    return scores


def masked_argmax(net, tokens, insert_mask):
    # np.argmax takes the first maximum, i.e. smallest slot index on ties.
    return int(np.argmax(q_values(net, tokens, insert_mask)))


def select_action(net, state, epsilon, rng):
    """Epsilon-greedy over valid slots: explore uniformly, else argmax."""
    valid = np.flatnonzero(state.insert_mask)
    if len(valid) == 0:
        raise ContractError("no valid insertion slot")
    if rng.random() < epsilon:
        return int(valid[rng.integers(len(valid))])
    return masked_argmax(net, state.tokens, state.insert_mask)


def double_q_target(primary, target, transition, gamma):
    """r + gamma * Qtarget(s', argmax_a Q(s', a)); r alone on done transitions."""
    if transition.done:
        return transition.reward
    best = masked_argmax(primary, transition.next_tokens, transition.next_mask)
    scores = target.position_scores(transition.next_tokens)
    return transition.reward + gamma * float(scores[best])


def polyak_update(target_params, primary_params, tau):
    """Elementwise target <- tau * primary + (1 - tau) * target."""
    if not target_params.congruent_with(primary_params):
        raise ContractError("target and primary parameter sets are not congruent")
    for name, p in target_params.items():
        p.value *= 1.0 - tau
        p.value += tau * primary_params[name].value
