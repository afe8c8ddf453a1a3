from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """FIFO ring of (state, action, reward, next_state) rows."""

    def __init__(self, capacity, state_dim, action_dim, reward_dim=1):
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, state_dim))
        self.a = np.zeros((self.capacity, action_dim))
        self.r = np.zeros((self.capacity, reward_dim))
        self.s2 = np.zeros((self.capacity, state_dim))
        self._next = 0
        self._len = 0

    def __len__(self):
        return self._len

    def push(self, s, a, r, s2) -> None:
        i = self._next
        self.s[i], self.a[i], self.r[i], self.s2[i] = s, a, r, s2
        self._next = (i + 1) % self.capacity
        self._len = min(self._len + 1, self.capacity)

    def sample(self, batch_size, rng):
        """Uniform minibatch without replacement, or None while warming up."""
        if self._len < batch_size:
            return None
        idx = rng.choice(self._len, size=batch_size, replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx]

    def contents(self):
        """Rows in insertion order (oldest first)."""
        if self._len < self.capacity:
            order = np.arange(self._len)
        else:
            order = (np.arange(self.capacity) + self._next) % self.capacity
        return self.s[order], self.a[order], self.r[order], self.s2[order]
