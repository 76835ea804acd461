"""MDP wrapping one malware sample and the frozen classifier.

Actions insert a NOP before the chosen token (slot N appends). The reward for
a step is the classifier's cross-entropy increase, loss_new - loss_old, so
episode returns telescope to final loss minus initial loss. Episodes end when
the classifier's argmax leaves the true family or after MAXTURN insertions.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, SampleExcludedError

MAXTURN = 50  # default cap on insertions per episode


@dataclass(frozen=True)
class EnvState:
    tokens: np.ndarray
    insert_mask: np.ndarray
    true_family: int
    step_count: int
    last_loss: float
    last_pred: int

    @property
    def evaded(self):
        return self.last_pred != self.true_family


@dataclass(frozen=True)
class StepOutcome:
    state: EnvState
    reward: float
    done: bool
    done_reason: str | None  # "evaded" | "maxturn" | None


@dataclass
class EpisodeTrace:
    sample_id: str
    family: int
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    done_reason: str = ""     # "evaded" | "maxturn" | "trivial"
    final_loss: float = 0.0

    @property
    def insertions(self):
        return len(self.actions)

    def to_json_line(self):
        return json.dumps({
            "sample_id": self.sample_id, "family": self.family,
            "actions": self.actions, "rewards": self.rewards,
            "done_reason": self.done_reason, "insertions": self.insertions,
            "final_loss": self.final_loss,
        })

    @classmethod
    def from_json_line(cls, line):
        d = json.loads(line)
        return cls(d["sample_id"], d["family"], d["actions"], d["rewards"],
                   d["done_reason"], d["final_loss"])


class EvasionEnv:
    """Episode mechanics against a frozen classifier; states are immutable."""

    def __init__(self, model, nop_id, maxturn=MAXTURN):
        self.model = model
        self.nop_id = int(nop_id)
        self.maxturn = maxturn

    def reset(self, sample):
        if not sample.eligible:
            raise SampleExcludedError(
                f"sample {sample.id}: every insertion slot is denied")
        loss, pred = self.model.loss_and_prediction(sample.tokens, sample.family)
        return EnvState(sample.tokens.copy(), sample.insert_mask.copy(),
                        sample.family, 0, loss, pred)

    def step(self, state, action):
        if state.evaded:
            raise ContractError("episode already ended (evaded)")
        if state.step_count >= self.maxturn:
            raise ContractError("episode already ended (maxturn)")
        n = len(state.tokens)
        if not 0 <= action <= n or not state.insert_mask[action]:
            raise ContractError(f"action {action} is masked or out of range")
        tokens = np.insert(state.tokens, action, self.nop_id)
        # The denied/allowed status of every original boundary survives; the
        # boundary we split yields two valid slots around the new NOP.
        mask = np.concatenate([state.insert_mask[:action], [True, True],
                               state.insert_mask[action + 1:]])
        loss, pred = self.model.loss_and_prediction(tokens, state.true_family)
        new_state = EnvState(tokens, mask, state.true_family,
                             state.step_count + 1, loss, pred)
        reward = loss - state.last_loss
        if pred != state.true_family:
            return StepOutcome(new_state, reward, True, "evaded")
        if new_state.step_count >= self.maxturn:
            return StepOutcome(new_state, reward, True, "maxturn")
        return StepOutcome(new_state, reward, False, None)


def episode_return(rewards):
    """Undiscounted return, the reporting quantity."""
    return float(sum(rewards))


def discounted_return(rewards, gamma):
    total = 0.0
    for r in reversed(list(rewards)):
        total = r + gamma * total
    return total
