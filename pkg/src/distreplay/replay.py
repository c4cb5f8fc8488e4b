"""Fixed-capacity ring buffer of transitions with stable slot ids.

Slots are reused in FIFO order once the buffer is full.  ``insert`` reports
the transition it overwrote so that a cluster index built on top of the
buffer can stay consistent without callbacks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidSlotError, RejectedInputError


@dataclass(frozen=True, eq=False)
class Transition:
    """One ``(state, action, reward, next_state, done)`` record."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool

    def same_as(self, other: "Transition") -> bool:
        return (
            self.action == other.action
            and self.reward == other.reward
            and self.done == other.done
            and np.array_equal(self.state, other.state)
            and np.array_equal(self.next_state, other.next_state)
        )


class Evicted(NamedTuple):
    slot: int
    transition: Transition


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    """Ring store of transitions for a ``state_dim``-dimensional environment.

    Storage is preallocated column-wise so batches can be gathered with a
    single fancy-index per field.

    Example:
        >>> buf = ReplayBuffer(capacity=3, state_dim=2)
        >>> slot, evicted = buf.insert(Transition(np.zeros(2), 0, -1.0, np.ones(2), False))
        >>> slot, evicted
        (0, None)
    """

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise RejectedInputError(f"capacity must be positive, got {capacity}")
        if state_dim < 1:
            raise RejectedInputError(f"state_dim must be positive, got {state_dim}")
        self._capacity = int(capacity)
        self.state_dim = int(state_dim)
        self._states = np.zeros((capacity, state_dim), dtype=np.float64)
        self._next_states = np.zeros((capacity, state_dim), dtype=np.float64)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity, dtype=np.float64)
        self._dones = np.zeros(capacity, dtype=bool)
        self._cursor = 0
        self._len = 0

    def __len__(self) -> int:
        return self._len

    def capacity(self) -> int:
        return self._capacity

    @property
    def write_cursor(self) -> int:
        return self._cursor

    def is_full(self) -> bool:
        return self._len == self._capacity

    def insert(self, t: Transition) -> tuple[int, Optional[Evicted]]:
        """Store ``t`` at the write cursor and return ``(slot, evicted)``."""
        state = np.asarray(t.state, dtype=np.float64)
        next_state = np.asarray(t.next_state, dtype=np.float64)
        if state.shape != (self.state_dim,) or next_state.shape != (self.state_dim,):
            raise RejectedInputError(
                f"expected states of shape ({self.state_dim},), "
                f"got {state.shape} and {next_state.shape}"
            )
        if t.action < 0:
            raise RejectedInputError(f"action must be non-negative, got {t.action}")
        return self.insert_raw(state, t.action, t.reward, next_state, t.done)

    def insert_raw(
        self,
        state: Sequence[float],
        action: int,
        reward: float,
        next_state: Sequence[float],
        done: bool,
    ) -> tuple[int, Optional[Evicted]]:
        # Unchecked fast path used by the training loop.
        slot = self._cursor
        evicted = Evicted(slot, self.get(slot)) if self._len == self._capacity else None
        self._states[slot] = state
        self._next_states[slot] = next_state
        self._actions[slot] = action
        self._rewards[slot] = reward
        self._dones[slot] = done
        self._cursor = (slot + 1) % self._capacity
        if self._len < self._capacity:
            self._len += 1
        return slot, evicted

    def is_occupied(self, slot: int) -> bool:
        # Slots fill in order 0, 1, ... so the occupied set is always a prefix.
        return 0 <= slot < self._len

    def get(self, slot: int) -> Transition:
        if not self.is_occupied(slot):
            raise InvalidSlotError(f"slot {slot} is not occupied")
        return Transition(
            state=self._states[slot].copy(),
            action=int(self._actions[slot]),
            reward=float(self._rewards[slot]),
            next_state=self._next_states[slot].copy(),
            done=bool(self._dones[slot]),
        )

    def occupied_slots(self) -> np.ndarray:
        return np.arange(self._len)

    def batch(self, slots: np.ndarray, states: bool = True) -> Batch:
        """Gather the fields of ``slots`` into arrays (no bounds check).

        With ``states=False`` the two state fields are returned as ``None``.
        """
        return Batch(
            self._states[slots] if states else None,
            self._actions[slots],
            self._rewards[slots],
            self._next_states[slots] if states else None,
            self._dones[slots],
        )

    def columns(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Live ``(actions, rewards, next_states, dones)`` storage arrays, full capacity."""
        return self._actions, self._rewards, self._next_states, self._dones

    def states(self) -> np.ndarray:
        """View of the first-state column of every occupied slot."""
        return self._states[: self._len]
