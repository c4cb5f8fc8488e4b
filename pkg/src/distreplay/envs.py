"""Small deterministic environments and an exact planning oracle.

All environments follow a minimal reset/step protocol::

    state = env.reset()
    result = env.step(action)   # StepResult(next_state, reward, done, terminal)

and are pure functions of ``(seed, action sequence)``.  ``done`` is forced
once an episode reaches ``spec.max_steps``; ``terminal`` is set only when
the environment itself ends the episode, which is what TD targets need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, RejectedInputError


@dataclass(frozen=True)
class EnvSpec:
    state_dim: int
    action_count: int
    low: tuple
    high: tuple
    max_steps: int


class StepResult(NamedTuple):
    """``done`` ends the episode (goal or time limit); ``terminal`` only the goal."""

    next_state: np.ndarray
    reward: float
    done: bool
    terminal: bool


@dataclass
class FiniteModel:
    """Tabular model: ``transitions[s][a]`` is a list of ``(prob, s', reward, done)``."""

    n_states: int
    n_actions: int
    transitions: list
    terminal: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.terminal is None:
            self.terminal = np.zeros(self.n_states, dtype=bool)


def value_iteration(model: FiniteModel, gamma: float, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Optimal Q table of ``model`` by synchronous Bellman optimality backups.

    Stops once the max-norm Bellman residual drops below ``tol``.
    """
    q = np.zeros((model.n_states, model.n_actions))
    for _ in range(max_iter):
        v = q.max(axis=1)
        new = np.zeros_like(q)
        for s in range(model.n_states):
            for a in range(model.n_actions):
                total = 0.0
                for p, s2, r, done in model.transitions[s][a]:
                    total += p * (r if done else r + gamma * v[s2])
                new[s, a] = total
        residual = np.abs(new - q).max()
        q = new
        if residual < tol:
            return q
    raise ConfigError(f"value iteration did not converge within {max_iter} sweeps")


def bellman_residual(model: FiniteModel, q: np.ndarray, gamma: float) -> float:
    v = q.max(axis=1)
    worst = 0.0
    for s in range(model.n_states):
        for a in range(model.n_actions):
            backup = sum(p * (r if d else r + gamma * v[s2]) for p, s2, r, d in model.transitions[s][a])
            worst = max(worst, abs(backup - q[s, a]))
    return worst


# --------------------------------------------------------------------------
# Gridworld

# up, right, down, left as (drow, dcol)
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


class GridWorld:
    """Deterministic 4-action grid.  The state is ``(row, col)`` as floats.

    Entering the goal pays ``step_reward + goal_reward`` and ends the
    episode; every other move pays ``step_reward``.  Moving into a wall or
    off the grid leaves the agent in place.
    """

    def __init__(
        self,
        width: int,
        height: int,
        start: tuple[int, int] = (0, 0),
        goal: Optional[tuple[int, int]] = None,
        walls: Sequence[tuple[int, int]] = (),
        step_reward: float = -1.0,
        goal_reward: float = 0.0,
        max_steps: int = 50,
        seed: int = 0,
    ):
        if width < 1 or height < 1:
            raise ConfigError("grid must be at least 1x1")
        goal = (height - 1, width - 1) if goal is None else tuple(goal)
        start = tuple(start)
        walls = frozenset(tuple(w) for w in walls)
        for name, cell in (("start", start), ("goal", goal)):
            if not (0 <= cell[0] < height and 0 <= cell[1] < width):
                raise ConfigError(f"{name} {cell} lies outside the {height}x{width} grid")
            if cell in walls:
                raise ConfigError(f"{name} {cell} is a wall")
        if start == goal:
            raise ConfigError("start and goal must differ")
        self.width, self.height = width, height
        self.start, self.goal, self.walls = start, goal, walls
        self.step_reward, self.goal_reward = float(step_reward), float(goal_reward)
        self.spec = EnvSpec(2, 4, (0.0, 0.0), (float(height - 1), float(width - 1)), max_steps)
        self._pos = start
        self._t = 0

    @classmethod
    def from_text(cls, text: str, **kwargs) -> "GridWorld":
        """Parse a map: ``#`` wall, ``S`` start, ``G`` goal, ``.`` free, one row per line."""
        rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if not rows:
            raise ConfigError("empty gridworld map")
        width = len(rows[0])
        start = goal = None
        walls = []
        for r, line in enumerate(rows):
            if len(line) != width:
                raise ConfigError(f"map row {r} has length {len(line)}, expected {width}")
            for c, ch in enumerate(line):
                if ch == "#":
                    walls.append((r, c))
                elif ch == "S":
                    if start is not None:
                        raise ConfigError("map has more than one start")
                    start = (r, c)
                elif ch == "G":
                    if goal is not None:
                        raise ConfigError("map has more than one goal")
                    goal = (r, c)
                elif ch != ".":
                    raise ConfigError(f"unknown map character {ch!r} at row {r}")
        if start is None or goal is None:
            raise ConfigError("map needs exactly one S and one G")
        return cls(width, len(rows), start, goal, walls, **kwargs)

    @classmethod
    def from_file(cls, path, **kwargs) -> "GridWorld":
        return cls.from_text(Path(path).read_text(), **kwargs)

    def _move(self, pos, action):
        dr, dc = MOVES[action]
        r, c = pos[0] + dr, pos[1] + dc
        if not (0 <= r < self.height and 0 <= c < self.width) or (r, c) in self.walls:
            return pos
        return (r, c)

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        self._pos = self.start
        self._t = 0
        return np.array(self._pos, dtype=np.float64)

    def step(self, action: int) -> StepResult:
        if not 0 <= action < 4:
            raise RejectedInputError(f"invalid action {action}")
        self._pos = self._move(self._pos, action)
        self._t += 1
        at_goal = self._pos == self.goal
        reward = self.step_reward + (self.goal_reward if at_goal else 0.0)
        done = at_goal or self._t >= self.spec.max_steps
        return StepResult(np.array(self._pos, dtype=np.float64), reward, done, at_goal)

    def state_index(self, state) -> int:
        return int(round(state[0])) * self.width + int(round(state[1]))

    def model(self) -> FiniteModel:
        n = self.width * self.height
        transitions = []
        terminal = np.zeros(n, dtype=bool)
        for s in range(n):
            pos = divmod(s, self.width)
            if pos == self.goal or pos in self.walls:
                terminal[s] = True
                transitions.append([[(1.0, s, 0.0, True)] for _ in range(4)])
                continue
            row = []
            for a in range(4):
                nxt = self._move(pos, a)
                at_goal = nxt == self.goal
                r = self.step_reward + (self.goal_reward if at_goal else 0.0)
                row.append([(1.0, nxt[0] * self.width + nxt[1], r, at_goal)])
            transitions.append(row)
        return FiniteModel(n, 4, transitions, terminal)

    def tabular_bins(self) -> tuple[int, ...]:
        return (self.height, self.width)


# --------------------------------------------------------------------------
# Chain


class ChainMDP:
    """``n_states`` in a row, start at 0, actions 0=left and 1=right.

    Entering the rightmost state pays 1 and terminates.  With probability
    ``slip`` the chosen action is flipped.
    """

    def __init__(self, n_states: int = 3, slip: float = 0.0, max_steps: int = 100, seed: int = 0):
        if n_states < 2:
            raise ConfigError(f"chain needs at least 2 states, got {n_states}")
        if not 0.0 <= slip <= 1.0:
            raise ConfigError(f"slip must be in [0, 1], got {slip}")
        self.n_states = n_states
        self.slip = slip
        self.spec = EnvSpec(1, 2, (0.0,), (float(n_states - 1),), max_steps)
        self._rng = np.random.default_rng(seed)
        self._pos = 0
        self._t = 0

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._pos = 0
        self._t = 0
        return np.array([0.0])

    def _next(self, pos: int, action: int) -> int:
        return max(pos - 1, 0) if action == 0 else pos + 1

    def step(self, action: int) -> StepResult:
        if action not in (0, 1):
            raise RejectedInputError(f"invalid action {action}")
        if self.slip > 0.0 and self._rng.random() < self.slip:
            action = 1 - action
        self._pos = self._next(self._pos, action)
        self._t += 1
        at_end = self._pos == self.n_states - 1
        done = at_end or self._t >= self.spec.max_steps
        return StepResult(np.array([float(self._pos)]), 1.0 if at_end else 0.0, done, at_end)

    def state_index(self, state) -> int:
        return int(round(state[0]))

    def model(self) -> FiniteModel:
        n = self.n_states
        terminal = np.zeros(n, dtype=bool)
        terminal[n - 1] = True
        transitions = []
        for s in range(n):
            if terminal[s]:
                transitions.append([[(1.0, s, 0.0, True)] for _ in range(2)])
                continue
            row = []
            for a in (0, 1):
                outcomes = []
                for p, eff in ((1.0 - self.slip, a), (self.slip, 1 - a)):
                    if p > 0.0:
                        s2 = self._next(s, eff)
                        end = s2 == n - 1
                        outcomes.append((p, s2, 1.0 if end else 0.0, end))
                row.append(outcomes)
            transitions.append(row)
        return FiniteModel(n, 2, transitions, terminal)

    def tabular_bins(self) -> tuple[int, ...]:
        return (self.n_states,)


# --------------------------------------------------------------------------
# Mountain car

MIN_POSITION, MAX_POSITION, GOAL_POSITION = -1.2, 0.6, 0.5
MAX_SPEED = 0.07
FORCE, GRAVITY = 0.001, 0.0025


def mountain_car_step(position: float, velocity: float, action: int) -> tuple[float, float]:
    velocity += (action - 1) * FORCE - GRAVITY * math.cos(3.0 * position)
    velocity = min(max(velocity, -MAX_SPEED), MAX_SPEED)
    position += velocity
    position = min(max(position, MIN_POSITION), MAX_POSITION)
    if position == MIN_POSITION and velocity < 0.0:
        velocity = 0.0
    return position, velocity


class MountainCar:
    """Classic under-powered car in a valley; actions push left, coast, push right."""

    def __init__(self, max_steps: int = 200, seed: int = 0):
        self.spec = EnvSpec(2, 3, (MIN_POSITION, -MAX_SPEED), (MAX_POSITION, MAX_SPEED), max_steps)
        self._rng = np.random.default_rng(seed)
        self._pos = -0.5
        self._vel = 0.0
        self._t = 0

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._pos = float(self._rng.uniform(-0.6, -0.4))
        self._vel = 0.0
        self._t = 0
        return np.array([self._pos, self._vel])

    def set_state(self, position: float, velocity: float) -> None:
        self._pos, self._vel = float(position), float(velocity)

    def step(self, action: int) -> StepResult:
        if action not in (0, 1, 2):
            raise RejectedInputError(f"invalid action {action}")
        self._pos, self._vel = mountain_car_step(self._pos, self._vel, action)
        self._t += 1
        at_goal = self._pos >= GOAL_POSITION
        done = at_goal or self._t >= self.spec.max_steps
        return StepResult(np.array([self._pos, self._vel]), -1.0, done, at_goal)


ENVIRONMENTS = {
    "gridworld": GridWorld,
    "chain": ChainMDP,
    "mountain_car": MountainCar,
}
