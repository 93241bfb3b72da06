import io
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrwapi.harness.exact import (exact_solve, finite_horizon, random_tabular_mdp,
                                  r_max)
from lrwapi.harness.generators import generator_mdp
from lrwapi.harness.policies import RandomPolicy, TabularPolicy
from lrwapi.rollout import (RolloutConfig, SelectionError, Trajectory, delta_action_select,
                            flatten, hoeffding_tolerance, improved_trajectories,
                            improved_trajectory, policy_rollout, read_training_set,
                            tabular_rollout, write_training_set)
from mdps import chain_mdp, grid_mdp


def test_config_validation():
    with pytest.raises(ValueError):
        RolloutConfig(width=0)
    with pytest.raises(ValueError):
        RolloutConfig(horizon=0)
    with pytest.raises(ValueError):
        RolloutConfig(discount=1.5)


def test_delta_select_examples():
    sel = delta_action_select({"a1": 5, "a2": 5, "a3": 3}, 0.0)
    assert sel.selected == ("a1", "a2") and sel.chosen == "a1"
    sel = delta_action_select({"c": 1.0, "b": 0.0, "a": -1.0}, 2.0)
    assert sel.selected == ("a", "b", "c") and sel.chosen == "a"
    with pytest.raises(SelectionError):
        delta_action_select({}, 0.1)


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.integers(0, 20), st.floats(-10, 10), min_size=1),
       st.floats(0, 5))
def test_delta_select_properties(q, delta):
    sel = delta_action_select(q, delta)
    best = max(q.values())
    assert sel.chosen == min(sel.selected)
    assert set(sel.selected) == {a for a, v in q.items() if best - v <= delta}
    assert best - q[sel.chosen] <= delta


def test_horizon_one_is_immediate_reward():
    M = random_tabular_mdp(6, 3, np.random.default_rng(0))
    pi = TabularPolicy([0] * 6)
    for w in (1, 7):
        q = policy_rollout(pi, 2, RolloutConfig(width=w, horizon=1, discount=0.9), M,
                           random.Random(0))
        assert q == {a: M.R[2, a] for a in range(3)}


def test_goal_state_estimates_are_zero(blocks):
    M = generator_mdp("blocks", [3])
    s = M.sample_initial(random.Random(0))
    goal = s.with_world({("on",) + f[1:] if f[0] == "gon" else ("on-table", f[1])
                         for f in s.goal if f[0] in ("gon", "gon-table")}
                        | {("handempty",)})
    assert M.is_terminal(goal)
    q = policy_rollout(RandomPolicy(M), goal, RolloutConfig(), M, random.Random(0))
    assert all(v == 0.0 for v in q.values())


@pytest.mark.parametrize("h", [1, 2, 5, 12])
def test_deterministic_chain_matches_recursion(h):
    M = chain_mdp(5)
    pi = np.array([0, 1, 0, 1, 0])
    _, Q = finite_horizon(M, pi, h)
    cfg = RolloutConfig(width=1, horizon=h, discount=M.discount)
    for s in range(4):
        q = policy_rollout(TabularPolicy(pi), s, cfg, M, random.Random(s))
        for a, v in q.items():
            assert abs(v - Q[s, a]) <= 1e-9


def test_deterministic_grid_matches_recursion():
    M = grid_mdp(7)
    rng = np.random.default_rng(3)
    pi = rng.integers(0, 4, M.n_states)
    h = 15
    _, Q = finite_horizon(M, pi, h)
    cfg = RolloutConfig(width=1, horizon=h, discount=M.discount)
    for s in range(M.n_states - 1):
        q = policy_rollout(TabularPolicy(pi), s, cfg, M, random.Random(s))
        assert max(abs(v - Q[s, a]) for a, v in q.items()) <= 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_stochastic_rollout_is_unbiased(seed):
    M = random_tabular_mdp(6, 2, np.random.default_rng(seed), discount=0.9, n_terminal=1)
    pi = np.zeros(6, int)
    h, w = 10, 2
    _, Q = finite_horizon(M, pi, h)
    s = int(np.flatnonzero(~M.terminal)[0])
    rng = random.Random(seed)
    cfg = RolloutConfig(width=w, horizon=h, discount=0.9)
    runs = [policy_rollout(TabularPolicy(pi), s, cfg, M, rng) for _ in range(1000)]
    tol = hoeffding_tolerance(r_max(M) / (1 - 0.9), 1000, w)
    for a in range(2):
        assert abs(np.mean([r[a] for r in runs]) - Q[s, a]) <= tol


def test_tabular_rollout_matches_recursion():
    M = chain_mdp(5, slip=0.3)
    pi = np.array([0, 0, 1, 0, 0])
    _, Q = finite_horizon(M, pi, 8)
    est = tabular_rollout(M.P, M.R, pi, 1, 8, 200_000, M.discount,
                          np.random.default_rng(0), terminal=M.terminal)
    assert np.allclose(est, Q[1], atol=0.02)
    M2 = chain_mdp(5)
    est = tabular_rollout(M2.P, M2.R, pi, 1, 8, 3, M2.discount,
                          np.random.default_rng(0), terminal=M2.terminal)
    assert np.allclose(est, finite_horizon(M2, pi, 8)[1][1], atol=1e-12)


def test_improved_action_matches_exact_improvement():
    M = chain_mdp(5, slip=0.2, discount=0.9)
    # smallest Q gap of this policy is about 1.1, well above the noise at w = 256
    pi = np.array([0, 1, 1, 1, 0])
    h = 20
    _, Qh = finite_horizon(M, pi, h)
    want = [int(np.argmax(Qh[s])) for s in range(4)]
    cfg = RolloutConfig(width=256, horizon=h, discount=0.9)
    rng = random.Random(0)
    for s in range(4):
        hits = sum(delta_action_select(policy_rollout(TabularPolicy(pi), s, cfg, M, rng)).chosen
                   == want[s] for _ in range(200))
        assert hits >= 190


def _blocks_setup(n=3, h=5):
    M = generator_mdp("blocks", [4])
    return M, RandomPolicy(M), RolloutConfig(width=1, horizon=h)


def test_improved_trajectories_shape_and_choice():
    M, pi, cfg = _blocks_setup()
    trajs = improved_trajectories(3, cfg, M, pi, random.Random(1))
    assert len(trajs) == 3
    for t in trajs:
        assert len(t) <= 5 and len(t.actions) == len(t.examples)
        for ex, a in zip(t.examples, t.actions):
            assert set(ex.q_estimates) == set(M.legal_actions(ex.state))
            assert ex.prior_action in ex.q_estimates
            assert ex.q_estimates[a] == ex.best_value()
            assert a == min(b for b, q in ex.q_estimates.items() if q == ex.best_value())
        assert math.isclose(t.value, sum(t.rewards))


def test_trajectories_stop_at_goal():
    M = generator_mdp("gripper", [1])
    pi = RandomPolicy(M)
    cfg = RolloutConfig(width=4, horizon=12)
    t = improved_trajectory(pi, cfg, M, random.Random(0), length=40)
    assert len(t) < 40
    s2, _ = M.step(t.examples[-1].state, t.actions[-1], random.Random(0))
    assert M.is_terminal(s2)


def test_trajectory_value_with_discount():
    t = Trajectory(rewards=[-1.0, -2.0, -0.5], discount=0.5)
    assert t.value == -1.0 - 1.0 - 0.125


def test_reproducible_and_schedule_independent():
    M, pi, cfg = _blocks_setup()
    a = improved_trajectories(4, cfg, M, pi, random.Random(7))
    b = improved_trajectories(4, cfg, M, pi, random.Random(7))
    assert [t.actions for t in a] == [t.actions for t in b]
    assert [[e.q_estimates for e in t.examples] for t in a] == \
           [[e.q_estimates for e in t.examples] for t in b]
    # trajectory k depends only on its own derived seed
    rng = random.Random(7)
    seeds = [rng.getrandbits(64) for _ in range(4)]
    solo = improved_trajectory(pi, cfg, M, random.Random(seeds[2]))
    assert solo.actions == a[2].actions


def test_explicit_starts_and_flatten():
    M, pi, cfg = _blocks_setup()
    rng = random.Random(3)
    starts = [M.sample_initial(rng) for _ in range(2)]
    trajs = improved_trajectories(2, cfg, M, pi, rng, starts=starts)
    assert [t.examples[0].state for t in trajs] == starts
    assert len(flatten(trajs)) == sum(len(t) for t in trajs)


def test_training_set_round_trip():
    M, pi, cfg = _blocks_setup()
    examples = flatten(improved_trajectories(3, cfg, M, pi, random.Random(2)))
    buf = io.StringIO()
    write_training_set(examples, buf)
    back = read_training_set(io.StringIO(buf.getvalue()))
    assert len(back) == len(examples)
    for x, y in zip(examples, back):
        assert x.state == y.state and x.prior_action == y.prior_action
        assert x.q_estimates == y.q_estimates


@pytest.mark.parametrize("seed", range(5))
def test_finite_horizon_gap_bound(seed):
    M = random_tabular_mdp(8, 3, np.random.default_rng(seed), discount=0.9)
    pi = np.random.default_rng(seed).integers(0, 3, 8)
    sol = exact_solve(M, pi, horizon=10)
    gap = np.nanmax(np.abs(sol.Q - sol.Q_h))
    assert gap <= 0.9 ** 10 * sol.v_max + 1e-9
