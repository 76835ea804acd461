"""The attack target: a shallow CNN mapping a mnemonic sequence to a
probability distribution over 9 families.

Architecture: 4-d embedding -> three parallel same-length convolutions
(widths 3/5/7, 100 filters each) -> global max pool each -> 300-feature
concatenation -> bias-free dense to 9 -> softmax. With V=557 this totals
exactly 10928 trainable scalars.
"""

import numpy as np

from . import layers
from .errors import InputError, TrainingError
from .optim import Adam
from .tensor import ParamSet, load_checkpoint, save_checkpoint

ARCH_TAG = "cnn-3-5-7-100"
PAD_ID = -1  # embeds as a zero row; used only to reach the widest filter
DEFAULT_FILTER_SPEC = ((3, 100), (5, 100), (7, 100))


def _init_params(vocab_size, embedding_dim, filter_spec, n_classes, rng):
    params = ParamSet()
    params.add("embedding",
               rng.uniform(-0.05, 0.05, size=(vocab_size, embedding_dim)))
    concat = 0
    for width, count in filter_spec:
        limit = np.sqrt(1.0 / (width * embedding_dim))
        params.add(f"conv{width}",
                   rng.uniform(-limit, limit, size=(count, width, embedding_dim)))
        concat += count
    limit = np.sqrt(1.0 / concat)
    params.add("dense", rng.uniform(-limit, limit, size=(concat, n_classes)))
    return params


class ClassifierModel:
    def __init__(self, vocab_size, embedding_dim=4, filter_spec=DEFAULT_FILTER_SPEC,
                 n_classes=9, seed=0, params=None):
        self.vocab_size = vocab_size
        self.embedding_dim = embedding_dim
        self.filter_spec = tuple((int(w), int(c)) for w, c in filter_spec)
        self.n_classes = n_classes
        self.min_length = max(w for w, _ in self.filter_spec)
        if params is None:
            params = _init_params(vocab_size, embedding_dim, self.filter_spec,
                                  n_classes, np.random.default_rng(seed))
        self.params = params

    # ------------------------------------------------------------- inference

    def _pad(self, tokens):
        tokens = np.asarray(tokens, dtype=np.int64)
        if len(tokens) == 0:
            raise InputError("classifier input must be nonempty")
        if len(tokens) < self.min_length:
            tokens = np.concatenate(
                [tokens, np.full(self.min_length - len(tokens), PAD_ID)])
        return tokens

    def forward(self, tokens):
        """Full forward pass; returns (probs, cache for backward)."""
        ids = self._pad(tokens)
        emb = layers.embedding_forward(ids, self.params["embedding"].value,
                                       pad_id=PAD_ID)
        convs, pools, args = [], [], []
        for width, _ in self.filter_spec:
            c = layers.conv1d_forward(emb, self.params[f"conv{width}"].value)
            pooled, arg = layers.global_max_pool(c)
            convs.append(c)
            pools.append(pooled)
            args.append(arg)
        feat = np.concatenate(pools)
        logits = layers.dense_forward(feat, self.params["dense"].value)
        probs = layers.softmax(logits)
        cache = {"ids": ids, "emb": emb, "args": args, "feat": feat, "probs": probs}
        return probs, cache

    def classify(self, tokens):
        return self.forward(tokens)[0]

    def predict(self, tokens):
        return int(np.argmax(self.classify(tokens)))

    def loss_of(self, tokens, family):
        return layers.cross_entropy(self.classify(tokens), family)

    def loss_and_prediction(self, tokens, family):
        probs = self.classify(tokens)
        return layers.cross_entropy(probs, family), int(np.argmax(probs))

    # -------------------------------------------------------------- training

    def backward(self, cache, dprobs):
        """Accumulate parameter gradients for one forward pass."""
        dlogits = layers.softmax_backward(cache["probs"], dprobs)
        dfeat, dw = layers.dense_backward(cache["feat"], self.params["dense"].value,
                                          dlogits)
        self.params["dense"].grad += dw
        demb = np.zeros_like(cache["emb"])
        n = cache["emb"].shape[0]
        offset = 0
        for (width, count), arg in zip(self.filter_spec, cache["args"]):
            dpool = dfeat[offset:offset + count]
            offset += count
            dconv = layers.global_max_pool_backward(dpool, arg, n)
            dx, dwc = layers.conv1d_backward(cache["emb"],
                                             self.params[f"conv{width}"].value,
                                             dconv)
            demb += dx
            self.params[f"conv{width}"].grad += dwc
        self.params["embedding"].grad += layers.embedding_backward(
            cache["ids"], demb, self.vocab_size, pad_id=PAD_ID)

    def loss_and_grad(self, tokens, family):
        """One forward+backward; gradients accumulate into self.params."""
        probs, cache = self.forward(tokens)
        loss = layers.cross_entropy(probs, family)
        self.backward(cache, layers.cross_entropy_backward(probs, family))
        return loss

    # ------------------------------------------------------------ checkpoint

    def save(self, path, seed=None):
        save_checkpoint(path, self.params, {
            "arch": ARCH_TAG,
            "V": self.vocab_size,
            "E": self.embedding_dim,
            "filter_spec": [list(fc) for fc in self.filter_spec],
            "n_classes": self.n_classes,
            "seed": seed,
        })

    @classmethod
    def load(cls, path):
        params, meta = load_checkpoint(path)
        if meta.get("arch") != ARCH_TAG:
            raise InputError(f"checkpoint arch {meta.get('arch')!r} != {ARCH_TAG!r}")
        return cls(meta["V"], meta["E"],
                   tuple(tuple(fc) for fc in meta["filter_spec"]),
                   meta["n_classes"], params=params)


def train_classifier(model, train_samples, val_samples, epochs=15, lr=1e-3,
                     seed=0, log=None):
    """Per-sample (batch size 1) training; keeps the best-validation epoch.

    Returns (best model, per-epoch metrics list). Zero epochs returns the
    untrained model unchanged.
    """
    if not train_samples:
        raise InputError("empty training split")
    rng = np.random.default_rng(seed)
    opt = Adam(model.params, lr=lr)
    best = (model.params.copy(), -1.0)
    metrics = []
    for epoch in range(epochs):
        order = rng.permutation(len(train_samples))
        total = 0.0
        for i in order:
            s = train_samples[i]
            model.params.zero_grads()
            loss = model.loss_and_grad(s.tokens, s.family)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss on sample {s.id}")
            total += loss
            opt.step()
        val_acc = evaluate(model, val_samples)[0] if val_samples else 0.0
        entry = {"epoch": epoch + 1, "train_loss": total / len(train_samples),
                 "val_accuracy": val_acc}
        metrics.append(entry)
        if log is not None:
            log(entry)
        if val_acc > best[1]:
            best = (model.params.copy(), val_acc)
    if epochs > 0 and val_samples:
        model.params = best[0]
    return model, metrics


def evaluate(model, samples):
    """Returns (accuracy, per-family accuracy dict, confusion matrix).

    confusion[i][j] counts true-family-i samples predicted as family j.
    """
    confusion = np.zeros((model.n_classes, model.n_classes), dtype=np.int64)
    for s in samples:
        confusion[s.family, model.predict(s.tokens)] += 1
    total = confusion.sum()
    accuracy = float(np.trace(confusion)) / total if total else 0.0
    per_family = {}
    for f in range(model.n_classes):
        n = confusion[f].sum()
        if n:
            per_family[f] = float(confusion[f, f]) / n
    return accuracy, per_family, confusion
