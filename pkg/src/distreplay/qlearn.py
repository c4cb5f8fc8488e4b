"""Tabular and linear Q-functions and the replay-driven Q-learning loop.

The loop per environment step is: act epsilon-greedily, step the env, store
the transition, file its first state under a cluster code, draw a batch
with the configured sampler, regress ``Q(s, a)`` toward targets computed
from a frozen copy of the parameters, and refresh that copy every
``target_sync`` steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .clustering import ClusterIndex, reindex
from .errors import ConfigError, NumericFaultError
from .replay import ReplayBuffer, Transition
from .sampling import SamplerConfig, draw_slots, sample_batch


class Discretizer:
    """Uniform grid over a box; ``bins[i]`` equal-width cells along dimension i.

    Values outside ``[low, high]`` fall into the edge cells.
    """

    def __init__(self, low: Sequence[float], high: Sequence[float], bins: Sequence[int]):
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.bins = np.asarray(bins, dtype=np.int64)
        if not (self.low.shape == self.high.shape == self.bins.shape):
            raise ConfigError("low, high and bins must have the same length")
        if np.any(self.high <= self.low) or np.any(self.bins < 1):
            raise ConfigError("discretizer needs high > low and at least one bin per dimension")
        self.width = (self.high - self.low) / self.bins
        self.strides = np.ones_like(self.bins)
        self.strides[:-1] = np.cumprod(self.bins[::-1])[:-1][::-1]
        self.n_cells = int(np.prod(self.bins))
        self._inv_width = 1.0 / self.width
        self._top = self.bins - 1
        self._plain = list(zip(self.low.tolist(), (1.0 / self.width).tolist(), self.bins.tolist(), self.strides.tolist()))

    def index(self, state) -> int:
        cell = 0
        # Same arithmetic as indices() so scalar and batch lookups agree.
        for x, (lo, inv_w, n, stride) in zip(state, self._plain):
            i = math.floor((x - lo) * inv_w)
            cell += stride * (0 if i < 0 else n - 1 if i >= n else i)
        return cell

    def indices(self, states: np.ndarray) -> np.ndarray:
        i = np.floor((states - self.low) * self._inv_width).astype(np.int64)
        np.maximum(i, 0, out=i)
        np.minimum(i, self._top, out=i)
        return i @ self.strides


class TabularQ:
    """Q table over the cells of a :class:`Discretizer`."""

    def __init__(self, discretizer: Discretizer, action_count: int, init: float = 0.0):
        self.discretizer = discretizer
        self.action_count = action_count
        self.params = np.full((discretizer.n_cells, action_count), float(init))

    def values(self, state) -> np.ndarray:
        return self.params[self.discretizer.index(state)]

    def values_batch(self, states) -> np.ndarray:
        return self.params[self.discretizer.indices(states)]

    def update(self, states, actions, targets, alpha: float) -> None:
        """Apply ``Q(s, a) += alpha * (y - Q(s, a))`` for each batch row in order.

        Rows sharing a cell see each other's updates, so a batch is stable
        for any ``alpha <= 1`` however many duplicates it holds.
        """
        cells = self.discretizer.indices(states).tolist()
        params = self.params
        for c, a, y in zip(cells, np.asarray(actions).tolist(), np.asarray(targets).tolist()):
            params[c, a] += alpha * (y - params[c, a])

    def copy(self) -> "TabularQ":
        other = TabularQ(self.discretizer, self.action_count)
        other.params = self.params.copy()
        return other


class OneHotFeatures:
    """Indicator of the discretizer cell; makes :class:`LinearQ` a lookup table."""

    def __init__(self, discretizer: Discretizer):
        self.discretizer = discretizer
        self.dim = discretizer.n_cells

    def __call__(self, states) -> np.ndarray:
        states = np.atleast_2d(states)
        phi = np.zeros((states.shape[0], self.dim))
        phi[np.arange(states.shape[0]), self.discretizer.indices(states)] = 1.0
        return phi


class AffineFeatures:
    """State rescaled to ``[-1, 1]`` by its bounds, plus a constant 1."""

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.dim = self.low.size + 1

    def __call__(self, states) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        z = 2.0 * (states - self.low) / (self.high - self.low) - 1.0
        return np.hstack([z, np.ones((z.shape[0], 1))])


class LinearQ:
    """``Q(s, a) = w_a . phi(s)`` for a fixed feature map ``phi``."""

    def __init__(self, features: Callable, action_count: int):
        self.features = features
        self.action_count = action_count
        self.params = np.zeros((action_count, features.dim))

    def values(self, state) -> np.ndarray:
        return self.params @ self.features(state)[0]

    def values_batch(self, states) -> np.ndarray:
        return self.features(states) @ self.params.T

    def update(self, states, actions, targets, alpha: float) -> None:
        # Half-gradient convention: the factor 2 of the squared error is
        # folded into alpha.  Rows are applied one after another, as in
        # TabularQ.update.
        phi = self.features(states)
        for f, a, y in zip(phi, np.asarray(actions).tolist(), np.asarray(targets).tolist()):
            w = self.params[a]
            w += alpha * (y - w @ f) * f

    def copy(self) -> "LinearQ":
        other = LinearQ(self.features, self.action_count)
        other.params = self.params.copy()
        return other


QFunction = TabularQ | LinearQ


@numba.njit(cache=True)
def _tabular_replay_step(
    slots, table, frozen, s_cells, s2_cells, actions, rewards, dones, alpha, gamma
):
    """TD updates for a batch of cached-cell transitions; returns False on a non-finite target."""
    for j in range(slots.shape[0]):
        i = slots[j]
        y = rewards[i]
        if not dones[i]:
            y += gamma * frozen[s2_cells[i]].max()
        if not np.isfinite(y):
            return False
        c, a = s_cells[i], actions[i]
        table[c, a] += alpha * (y - table[c, a])
    return True


def td_target(t: Transition, target: QFunction, gamma: float) -> float:
    if t.done:
        return float(t.reward)
    return float(t.reward + gamma * target.values(t.next_state).max())


def td_targets(rewards, next_states, dones, target: QFunction, gamma: float) -> np.ndarray:
    bootstrap = target.values_batch(next_states).max(axis=1)
    return np.where(dones, rewards, rewards + gamma * bootstrap)


def apply_update(q: QFunction, t: Transition, y: float, alpha: float) -> None:
    if not math.isfinite(y):
        raise NumericFaultError(f"non-finite TD target {y}")
    q.update(np.atleast_2d(t.state), np.array([t.action]), np.array([y]), alpha)
    if not np.all(np.isfinite(q.values(t.state))):
        raise NumericFaultError("Q values became non-finite")


def greedy_action(values: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest action index.
    return int(np.argmax(values))


def _epsilon_greedy(values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(values.shape[0]))
    return int(np.argmax(values))


def act_epsilon_greedy(q: QFunction, state, epsilon: float, rng: np.random.Generator) -> int:
    return _epsilon_greedy(q.values(state), epsilon, rng)


def sync_target(q: QFunction, target: QFunction) -> None:
    target.params[...] = q.params


@dataclass
class TrainConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    # Annealing length; None means 10% of episodes * max_steps.
    epsilon_anneal_steps: Optional[int] = None
    episodes: int = 500
    max_steps: int = 200
    target_sync: int = 20
    batch_size: int = 32
    warmup: int = 1000
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    # When False, time-limit cutoffs are stored as terminal transitions.
    bootstrap_on_timeout: bool = True

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        for name in ("episodes", "max_steps", "target_sync", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.warmup < 1:
            raise ConfigError("warmup must be at least 1")
        if not (0.0 <= self.epsilon_end <= 1.0 and 0.0 <= self.epsilon_start <= 1.0):
            raise ConfigError("epsilon values must lie in [0, 1]")

    @property
    def anneal_steps(self) -> int:
        if self.epsilon_anneal_steps is not None:
            return self.epsilon_anneal_steps
        return max(1, int(0.1 * self.episodes * self.max_steps))

    def epsilon(self, step: int) -> float:
        if step >= self.anneal_steps:
            return self.epsilon_end
        return self.epsilon_start + step / self.anneal_steps * (self.epsilon_end - self.epsilon_start)


@dataclass
class EpisodeStats:
    episode: int
    total_reward: float
    steps: int
    mean_reward_100: float
    wall_steps: int


def trailing_mean(series: Sequence[float], window: int = 100) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def default_q(env, bins: int = 40) -> TabularQ:
    """Tabular Q over ``env``: exact cells for discrete envs, ``bins`` per dim otherwise."""
    spec = env.spec
    if hasattr(env, "tabular_bins"):
        shape = env.tabular_bins()
        low = [lo - 0.5 for lo in spec.low]
        high = [hi + 0.5 for hi in spec.high]
    else:
        shape = [bins] * spec.state_dim
        low, high = spec.low, spec.high
    return TabularQ(Discretizer(low, high, shape), spec.action_count)


@dataclass
class TrainState:
    """Everything a finished run leaves behind besides its episode stats."""

    q: QFunction
    target: QFunction
    buffer: ReplayBuffer
    index: ClusterIndex
    updates: int = 0
    first_update_step: Optional[int] = None


def train(
    env,
    config: TrainConfig,
    clusterer,
    buffer: ReplayBuffer,
    seed: int = 0,
    q: Optional[QFunction] = None,
    index: Optional[ClusterIndex] = None,
    state: Optional[TrainState] = None,
) -> list[EpisodeStats]:
    """Run ``config.episodes`` episodes of replay-based Q-learning.

    ``seed`` feeds three independent streams (environment, exploration,
    replay sampling), so the run is reproducible bit-for-bit.  Pass a
    :class:`TrainState` as ``state`` to get the learner, buffer and index
    back after the run.
    """
    env_ss, policy_ss, sampler_ss = np.random.SeedSequence(seed).spawn(3)
    env_seed = int(env_ss.generate_state(1)[0])
    policy_rng = np.random.default_rng(policy_ss)
    sampler_rng = np.random.default_rng(sampler_ss)

    q = q if q is not None else default_q(env)
    target = q.copy()
    index = index if index is not None else ClusterIndex()
    if state is not None:
        state.q, state.target, state.buffer, state.index = q, target, buffer, index

    sampler = config.sampler
    alpha, gamma, batch_size, warmup = config.alpha, config.gamma, config.batch_size, config.warmup
    bootstrap_on_timeout = config.bootstrap_on_timeout
    insert = buffer.insert_raw
    code_of = clusterer.code
    stats: list[EpisodeStats] = []
    rewards_seen: list[float] = []
    step = 0
    inserts = 0
    updates = 0

    # Tabular runs cache each slot's cell ids so updates skip re-discretising.
    tabular = isinstance(q, TabularQ)
    if tabular:
        cell_of = q.discretizer.index
        s_cells = np.zeros(buffer.capacity(), dtype=np.int64)
        s2_cells = np.zeros(buffer.capacity(), dtype=np.int64)
        table, frozen = q.params, target.params
        b_actions, b_rewards, _, b_dones = buffer.columns()
        slots = np.empty(batch_size, dtype=np.int64)
        beta = sampler.effective_beta

    for episode in range(config.episodes):
        s = env.reset(seed=env_seed if episode == 0 else None)
        if tabular:
            c = cell_of(s)
        total = 0.0
        steps = 0
        done = False
        while not done:
            values = table[c] if tabular else q.values(s)
            a = _epsilon_greedy(values, config.epsilon(step), policy_rng)
            s2, r, done, terminal = env.step(a)
            slot, evicted = insert(s, a, r, s2, terminal if bootstrap_on_timeout else done)
            if evicted is not None:
                index.remove(slot, index.cluster_of(slot))
            index.insert(slot, code_of(s))
            if tabular:
                c2 = cell_of(s2)
                s_cells[slot] = c
                s2_cells[slot] = c2
            inserts += 1
            if clusterer.wants_fit(inserts):
                states = buffer.states()
                clusterer.fit(states)
                reindex(index, clusterer.codes(states))

            if len(buffer) >= warmup:
                if tabular:
                    rows, counts, members = index.sampling_arrays()
                    draw_slots(sampler_rng.random((3, batch_size)), beta, len(buffer), rows, counts, members, slots)
                    ok = _tabular_replay_step(
                        slots, table, frozen, s_cells, s2_cells, b_actions, b_rewards, b_dones, alpha, gamma
                    )
                else:
                    slots = sample_batch(batch_size, sampler, len(buffer), index, sampler_rng)
                    b = buffer.batch(slots)
                    y = td_targets(b.rewards, b.next_states, b.dones, target, gamma)
                    ok = bool(np.all(np.isfinite(y)))
                    if ok:
                        q.update(b.states, b.actions, y, alpha)
                if not ok:
                    raise NumericFaultError(f"non-finite TD target at step {step}, episode {episode}")
                if state is not None and state.first_update_step is None:
                    state.first_update_step = step
                updates += 1

            step += 1
            if step % config.target_sync == 0:
                sync_target(q, target)
            total += r
            steps += 1
            s = s2
            if tabular:
                c = c2
            if steps > env.spec.max_steps:
                raise ConfigError("environment did not end the episode at max_steps")

        rewards_seen.append(total)
        window = rewards_seen[-100:]
        stats.append(EpisodeStats(episode, total, steps, sum(window) / len(window), step))

    if not np.all(np.isfinite(q.params)):
        raise NumericFaultError("Q parameters became non-finite during training")
    if state is not None:
        state.updates = updates
    return stats
