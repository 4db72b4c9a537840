from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray

    def __len__(self):
        return len(self.r)

    @classmethod
    def from_transitions(cls, transitions):
        return cls(
            np.array([t.s for t in transitions], dtype=float),
            np.array([t.a for t in transitions], dtype=float),
            np.array([t.r for t in transitions], dtype=float),
            np.array([t.s_next for t in transitions], dtype=float),
        )


class ReplayMemory:
    """Fixed-capacity FIFO ring buffer of transitions."""

    def __init__(self, capacity, state_dim, action_dim):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, s, a, r, s_next):
        i = self._next
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s_next
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def contents(self):
        """All stored transitions, oldest first."""
        start = self._next if self._size == self.capacity else 0
        order = (start + np.arange(self._size)) % self.capacity
        return [Transition(self._s[i].copy(), self._a[i].copy(), float(self._r[i]), self._s2[i].copy())
                for i in order]

    def sample(self, rng, batch_size):
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(self._s[idx], self._a[idx], self._r[idx], self._s2[idx])
