from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Transition:
    state: np.ndarray  # normalized (num_tests, num_ag)
    action: np.ndarray  # (cover, split_norm)
    reward: float
    next_state: np.ndarray
    next_actions: np.ndarray  # shape (k, 2); empty when terminal
    terminal: bool
    step: int = 0  # global step counter at storage time
    fault: int = field(default=-1, compare=False)


class ReplayMemory:
    """Bounded FIFO buffer of transitions."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    @property
    def full(self) -> bool:
        return len(self._items) == self.capacity

    def push(self, transition: Transition) -> None:
        self._items.append(transition)  # deque(maxlen) drops the oldest

    def sample(self, rng: np.random.Generator, batch_size: int) -> list[Transition]:
        size = min(batch_size, len(self._items))
        idx = rng.choice(len(self._items), size=size, replace=False)
        return [self._items[i] for i in idx]
