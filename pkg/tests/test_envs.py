import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distreplay.envs import (
    ChainMDP,
    FiniteModel,
    GridWorld,
    MountainCar,
    bellman_residual,
    mountain_car_step,
    value_iteration,
)
from distreplay.errors import ConfigError, RejectedInputError


def rollout(env, actions, seed=None):
    s = env.reset(seed=seed)
    out = [tuple(s)]
    for a in actions:
        r = env.step(a)
        out.append((tuple(r.next_state), r.reward, r.done, r.terminal))
        if r.done:
            break
    return out


# ---------------------------------------------------------------- gridworld


def test_one_by_two_grid_optimal_return():
    env = GridWorld(2, 1, start=(0, 0), goal=(0, 1))
    q = value_iteration(env.model(), gamma=1.0)
    assert q[0].max() == -1.0
    r = env.step(1)
    assert r.reward == -1.0 and r.done and r.terminal


def test_four_by_four_optimal_return_is_minus_six():
    env = GridWorld(4, 4)
    q = value_iteration(env.model(), gamma=1.0)
    assert q[env.state_index(env.reset())].max() == -6.0


def test_bfs_oracle_on_walled_grid():
    text = """
    S..#
    .#.#
    ...G
    """
    env = GridWorld.from_text(text)
    q = value_iteration(env.model(), gamma=1.0)
    # Independent oracle: breadth-first shortest path length.
    free = {(r, c) for r in range(3) for c in range(4)} - env.walls
    dist = {env.start: 0}
    frontier = [env.start]
    while frontier:
        nxt = []
        for r, c in frontier:
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                p = (r + dr, c + dc)
                if p in free and p not in dist:
                    dist[p] = dist[(r, c)] + 1
                    nxt.append(p)
        frontier = nxt
    assert q[env.state_index(env.reset())].max() == -dist[env.goal]


def test_wall_bump_keeps_position():
    env = GridWorld.from_text("S#G\n...")
    env.reset()
    r = env.step(1)  # right, into the wall
    assert tuple(r.next_state) == (0.0, 0.0) and r.reward == -1.0 and not r.done
    r = env.step(0)  # up, off the grid
    assert tuple(r.next_state) == (0.0, 0.0)


def test_time_limit_sets_done_not_terminal():
    env = GridWorld(5, 5, max_steps=3)
    env.reset()
    results = [env.step(3) for _ in range(3)]
    assert [r.done for r in results] == [False, False, True]
    assert not results[-1].terminal


@pytest.mark.parametrize(
    "text",
    ["", "S..\n..", "S.X\n..G", "S..\n...", "SS.\n..G", "S.G\n..G"],
)
def test_malformed_maps(text):
    with pytest.raises(ConfigError):
        GridWorld.from_text(text)


def test_map_file_round_trip(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("S.#\n..G\n")
    env = GridWorld.from_file(path)
    assert (env.width, env.height, env.start, env.goal) == (3, 2, (0, 0), (1, 2))
    assert env.walls == {(0, 2)}


def test_bad_grid_arguments():
    with pytest.raises(ConfigError):
        GridWorld(3, 3, start=(0, 0), goal=(0, 0))
    with pytest.raises(ConfigError):
        GridWorld(3, 3, goal=(5, 5))
    with pytest.raises(ConfigError):
        GridWorld(3, 3, walls=[(2, 2)])
    with pytest.raises(RejectedInputError):
        GridWorld(3, 3).step(4)


def test_random_walk_visits_are_skewed_to_start():
    env = GridWorld(10, 10)
    rng = np.random.default_rng(0)
    visits = np.zeros(100)
    s = env.reset()
    for a in rng.integers(4, size=100_000).tolist():
        visits[env.state_index(s)] += 1
        r = env.step(a)
        s = env.reset() if r.done else r.next_state
    top = np.sort(visits)[::-1][:20].sum() / visits.sum()
    assert top > 0.5


@settings(max_examples=30, deadline=None)
@given(seq=st.lists(st.integers(0, 3), max_size=60))
def test_gridworld_deterministic(seq):
    assert rollout(GridWorld(6, 4), seq) == rollout(GridWorld(6, 4), seq)


# ---------------------------------------------------------------- chain


def test_chain_optimal_value_point_nine():
    q = value_iteration(ChainMDP(3).model(), gamma=0.9)
    assert q[0, 1] == pytest.approx(0.9, abs=1e-12)
    assert q[1, 1] == pytest.approx(1.0, abs=1e-12)


def test_chain_reward_only_on_terminal_transition():
    env = ChainMDP(4)
    env.reset()
    rs = [env.step(1) for _ in range(3)]
    assert [r.reward for r in rs] == [0.0, 0.0, 1.0]
    assert [r.terminal for r in rs] == [False, False, True]


def test_chain_left_bounces_at_zero():
    env = ChainMDP(3)
    env.reset()
    assert env.step(0).next_state[0] == 0.0


def test_chain_slip_is_seeded():
    seq = [1, 0, 1, 1, 0, 1, 1, 1] * 4
    a = rollout(ChainMDP(5, slip=0.3), seq, seed=4)
    b = rollout(ChainMDP(5, slip=0.3), seq, seed=4)
    assert a == b
    assert rollout(ChainMDP(5), seq) == rollout(ChainMDP(5), seq)


def test_chain_slip_model_sums_to_one():
    model = ChainMDP(4, slip=0.25).model()
    for row in model.transitions:
        for outcomes in row:
            assert math.fsum(p for p, *_ in outcomes) == pytest.approx(1.0)


def test_chain_bad_arguments():
    with pytest.raises(ConfigError):
        ChainMDP(1)
    with pytest.raises(ConfigError):
        ChainMDP(3, slip=1.5)


# ---------------------------------------------------------------- value iteration


def test_self_loop_zero_reward():
    model = FiniteModel(1, 2, [[[(1.0, 0, 0.0, False)], [(1.0, 0, 0.0, False)]]])
    np.testing.assert_array_equal(value_iteration(model, gamma=0.9), np.zeros((1, 2)))


def test_value_iteration_improper_loop_raises():
    model = FiniteModel(1, 1, [[[(1.0, 0, 1.0, False)]]])
    with pytest.raises(ConfigError):
        value_iteration(model, gamma=1.0, max_iter=50)


@settings(max_examples=15, deadline=None)
@given(w=st.integers(2, 5), h=st.integers(1, 5), gamma=st.sampled_from([0.5, 0.9, 1.0]), seed=st.integers(0, 1000))
def test_residual_below_tol_on_random_grids(w, h, gamma, seed):
    rng = np.random.default_rng(seed)
    walls = [(r, c) for r in range(h) for c in range(w) if rng.random() < 0.2 and (r, c) not in ((0, 0), (h - 1, w - 1))]
    env = GridWorld(w, h, walls=walls)
    model = env.model()
    # Walls may cut the goal off; with gamma=1 that makes values unbounded.
    try:
        q = value_iteration(model, gamma, tol=1e-10, max_iter=5000)
    except ConfigError:
        assert gamma == 1.0
        return
    assert bellman_residual(model, q, gamma) < 1e-9


# ---------------------------------------------------------------- mountain car


def test_mountain_car_single_step_hand_evaluation():
    pos, vel = mountain_car_step(-0.5, 0.0, 2)
    v = 0.001 - 0.0025 * math.cos(-1.5)
    assert vel == v
    assert pos == -0.5 + v


def test_full_throttle_right_needs_momentum():
    env = MountainCar()
    env.reset()
    env.set_state(-0.5, 0.0)
    for t in range(50):
        r = env.step(2)
        assert not r.done
        assert r.reward == -1.0


def test_left_wall_clamps_and_stops():
    env = MountainCar()
    env.reset()
    env.set_state(-1.19, -0.05)
    r = env.step(0)
    assert r.next_state[0] == -1.2 and r.next_state[1] == 0.0


def test_speed_is_clipped():
    # Unclipped this would be 0.0699 + 0.001 - 0.0025 cos(-1.5) > 0.07.
    pos, vel = mountain_car_step(-0.5, 0.0699, 2)
    assert vel == 0.07 and pos == -0.5 + 0.07
    _, vel = mountain_car_step(0.0, -0.0699, 0)
    assert vel == -0.07


def test_mountain_car_reset_range_and_seed():
    starts = [MountainCar(seed=s).reset()[0] for s in range(50)]
    assert all(-0.6 <= x <= -0.4 for x in starts)
    np.testing.assert_array_equal(MountainCar(seed=3).reset(), MountainCar(seed=3).reset())


def test_mountain_car_time_limit():
    env = MountainCar(max_steps=200)
    env.reset()
    results = [env.step(1) for _ in range(200)]
    assert results[-1].done and not results[-1].terminal
    assert not any(r.done for r in results[:-1])


def test_mountain_car_bang_bang_reaches_goal():
    # Push in the direction of motion: a classic hand-written controller.
    env = MountainCar(seed=0)
    s = env.reset()
    for _ in range(200):
        r = env.step(2 if s[1] >= 0 else 0)
        s = r.next_state
        if r.done:
            break
    assert r.terminal and s[0] >= 0.5


def test_mountain_car_rejects_bad_action():
    with pytest.raises(RejectedInputError):
        MountainCar().step(3)
