"""Experience replay buffer and the exploration schedule."""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

BUFFER_CAPACITY = 2000


@dataclass(frozen=True)
class Transition:
    tokens: np.ndarray
    mask: np.ndarray
    action: int
    reward: float
    next_tokens: np.ndarray
    next_mask: np.ndarray
    done: bool


class ReplayBuffer:
    """FIFO ring: at capacity, pushing evicts the oldest transition."""

    def __init__(self, capacity=BUFFER_CAPACITY):
        self._buf = deque(maxlen=capacity)
        self.capacity = capacity

    def push(self, transition):
        self._buf.append(transition)

    def __len__(self):
        return len(self._buf)

    def __getitem__(self, i):
        return self._buf[i]

    def sample(self, batch_size, rng):
        if batch_size > len(self._buf):
            raise ContractError(
                f"cannot sample {batch_size} from buffer of {len(self._buf)}")
        idx = rng.choice(len(self._buf), size=batch_size, replace=False)
        return [self._buf[int(i)] for i in idx]


class EpsilonSchedule:
    """Linear decay from initial to final over horizon environment steps."""

    def __init__(self, initial=1.0, final=0.5, horizon=1):
        if horizon < 1:
            raise ContractError("epsilon horizon must be >= 1")
        self.initial = initial
        self.final = final
        self.horizon = horizon

    def __call__(self, step):
        if step >= self.horizon:
            return self.final
        frac = step / self.horizon
        return self.initial + (self.final - self.initial) * frac
