"""Agent training (Double Q-learning with experience replay) and the episode
runners used at evaluation time: random baseline and greedy policy."""

import numpy as np

from .config import AgentConfig
from .env import EpisodeTrace, episode_return
from .errors import InputError, TrainingError
from .optim import Adam
from .qnet import QNetwork, double_q_target, masked_argmax, polyak_update, select_action
from .replay import EpsilonSchedule, ReplayBuffer, Transition


def _minibatch_update(primary, target, opt, batch, gamma):
    """One gradient step on the mean squared Bellman error of the batch."""
    primary.params.zero_grads()
    total = 0.0
    scale = 1.0 / len(batch)
    for tr in batch:
        tgt = double_q_target(primary, target, tr, gamma)
        q, cache = primary.forward(tr.tokens)
        slot = min(tr.action, len(q) - 1)  # append slot aliases position N-1
        err = tgt - q[slot]
        total += err * err
        dq = np.zeros(len(q))
        dq[slot] = -2.0 * err * scale
        primary.backward(cache, dq)
    if not np.isfinite(total):
        raise TrainingError(f"non-finite minibatch loss {total}")
    opt.step()
    return total * scale


def eligible_pool(env, samples):
    """Samples that can start a training episode: some valid slot and not
    already misclassified (zero-signal episodes are excluded)."""
    pool = []
    for s in samples:
        if not s.eligible:
            continue
        if not env.reset(s).evaded:
            pool.append(s)
    return pool


def train_agent(env, samples, cfg: AgentConfig = None, seed=0, log=None,
                episodes=None, max_steps=None):
    """Train one family's Q-network against the frozen classifier in env.

    Per environment step: epsilon-greedy action, transition stored; after a
    warmup, one uniform minibatch update plus a Polyak target blend. Episodes
    draw eligible samples round-robin. max_steps, when set, cuts training off
    after that many environment steps regardless of the episode budget.
    Returns (primary network, episode log).
    """
    cfg = cfg or AgentConfig()
    n_episodes = cfg.episodes if episodes is None else episodes
    pool = eligible_pool(env, samples)
    if not pool:
        raise InputError("no eligible sample in the training pool")

    rng = np.random.default_rng(seed)
    primary = QNetwork(env.model.vocab_size, cfg.embedding_dim, cfg.n_filters,
                       cfg.filter_width, head=cfg.head, seed=seed)
    target = QNetwork(env.model.vocab_size, cfg.embedding_dim, cfg.n_filters,
                      cfg.filter_width, head=cfg.head,
                      params=primary.params.copy())
    opt = Adam(primary.params, lr=cfg.lr)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    schedule = EpsilonSchedule(cfg.epsilon_initial, cfg.epsilon_final,
                               cfg.epsilon_horizon)

    history = []
    global_step = 0
    for episode in range(n_episodes):
        if max_steps is not None and global_step >= max_steps:
            break
        state = env.reset(pool[episode % len(pool)])
        rewards = []
        epsilon = schedule(global_step)
        done_reason = None
        while True:
            epsilon = schedule(global_step)
            action = select_action(primary, state, epsilon, rng)
            out = env.step(state, action)
            buffer.push(Transition(state.tokens, state.insert_mask, action,
                                   out.reward, out.state.tokens,
                                   out.state.insert_mask, out.done))
            global_step += 1
            rewards.append(out.reward)
            if len(buffer) >= cfg.warmup:
                _minibatch_update(primary, target, opt,
                                  buffer.sample(cfg.batch_size, rng), cfg.gamma)
                polyak_update(target.params, primary.params, cfg.tau)
            state = out.state
            if out.done:
                done_reason = out.done_reason
                break
            if max_steps is not None and global_step >= max_steps:
                break
        entry = {"episode": episode, "steps": len(rewards),
                 "return": episode_return(rewards),
                 "evaded": done_reason == "evaded", "epsilon": epsilon}
        history.append(entry)
        if log is not None:
            log(entry)
    return primary, history


def random_agent(env, sample, rng):
    """Uniform valid insertion each step until done."""
    return _run_episode(env, sample,
                        lambda state: _uniform_action(state, rng))


def greedy_agent(env, sample, net):
    """Greedy (epsilon = 0) policy under a trained Q-network."""
    return _run_episode(env, sample,
                        lambda state: masked_argmax(net, state.tokens,
                                                    state.insert_mask))


def _uniform_action(state, rng):
    valid = np.flatnonzero(state.insert_mask)
    return int(valid[rng.integers(len(valid))])


def _run_episode(env, sample, policy):
    trace = EpisodeTrace(sample.id, sample.family)
    state = env.reset(sample)
    if state.evaded:
        trace.done_reason = "trivial"
        trace.final_loss = state.last_loss
        return trace
    while True:
        action = policy(state)
        out = env.step(state, action)
        trace.actions.append(int(action))
        trace.rewards.append(float(out.reward))
        state = out.state
        if out.done:
            trace.done_reason = out.done_reason
            break
    trace.final_loss = float(state.last_loss)
    return trace
