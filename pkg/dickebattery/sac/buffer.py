#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Fixed-capacity first-in-first-out replay buffer."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    @property
    def size(self) -> int:
        return self.rewards.shape[0]


class ReplayBuffer:
    """Preallocated ring; once full, each insertion evicts the oldest entry.

    Observations are stored in single precision: at 180k entries they dominate
    the memory of a run.
    """

    def __init__(self, capacity: int, state_dim: int, *, state_dtype=np.float32):
        if capacity < 1:
            raise ValueError(f"Replay buffer capacity must be positive: {capacity}")
        self.capacity = capacity
        self.state_dim = state_dim
        self.states = np.zeros((capacity, state_dim), dtype=state_dtype)
        self.next_states = np.zeros((capacity, state_dim), dtype=state_dtype)
        self.actions = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0
        self.total_added = 0

    def __len__(self) -> int:
        return self._size

    def add(
        self,
        state: np.ndarray,
        action: float,
        reward: float,
        next_state: np.ndarray,
        done: bool,
    ) -> None:
        slot = self._next
        self.states[slot] = state
        self.actions[slot] = action
        self.rewards[slot] = reward
        self.next_states[slot] = next_state
        self.dones[slot] = float(done)
        self._next = (slot + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self.total_added += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draw of distinct entries; the batch shrinks to the size held."""
        if not self._size:
            raise ValueError("Cannot sample from an empty replay buffer")
        size = min(batch_size, self._size)
        indices = rng.choice(self._size, size=size, replace=False)
        return Batch(
            states=self.states[indices],
            actions=self.actions[indices],
            rewards=self.rewards[indices],
            next_states=self.next_states[indices],
            dones=self.dones[indices],
        )
