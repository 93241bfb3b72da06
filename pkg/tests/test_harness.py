import math
import random
from collections import deque

import numpy as np
import pytest
from sklearn.base import clone

from lrwapi.harness import (LRWAPI, EvalReport, IterationRow, LRWConfig, LRWRun,
                            RWConfig, api, api_step, evaluate_policy, report_csv,
                            rw_sampler)
from lrwapi.harness.exact import (all_tabular_policies, exact_solve, flatten_relational,
                                  random_tabular_mdp, value_iteration)
from lrwapi.harness.generators import (ConfigError, blocks_problem, generate_problem,
                                       GeneratorSpec, generator_mdp, gripper_problem)
from lrwapi.harness.policies import DecisionListPolicy, RandomPolicy
from lrwapi.harness.randomwalk import sample_rw_problem
from lrwapi.mdp import RelState, RelationalMDP, is_goal_state
from lrwapi.parsing import parse_policy
from lrwapi.rollout import RolloutConfig
from conftest import GRIPPER_HAND_POLICY, fixture_policy
from oracles import towers_valid


def _hand(M):
    return DecisionListPolicy(parse_policy(GRIPPER_HAND_POLICY, M.domain), M.domain)


# -- generators -------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 3, 8])
def test_blocks_problems_are_valid_towers(n):
    rng = random.Random(n)
    for _ in range(20):
        s = blocks_problem(n, rng)
        world = {f for f in s.world if f[0] in ("on", "on-table", "clear")}
        assert towers_valid(world, s.objects)
        # goal: "on" facts only, forming disjoint acyclic chains
        assert {f[0] for f in s.goal} <= {"gon"}
        above = [f[1] for f in s.goal]
        below = [f[2] for f in s.goal]
        assert len(set(above)) == len(above) and len(set(below)) == len(below)
        for b in s.objects:
            seen, x = set(), b
            while x in below:
                assert x not in seen
                seen.add(x)
                x = above[below.index(x)]


def test_unknown_generator():
    with pytest.raises(ConfigError):
        generator_mdp("sokoban", [3])
    with pytest.raises(ConfigError):
        generate_problem(GeneratorSpec("blocks", {"blocks": 0}))
    with pytest.raises(ConfigError):
        generate_problem(GeneratorSpec("blocks", {}))
    with pytest.raises(ConfigError):
        generator_mdp("blocks", [])
    assert generate_problem(GeneratorSpec("blocks", {"blocks": 4}, seed=2)) == \
        generate_problem(GeneratorSpec("blocks", {"blocks": 4}, seed=2))


# -- random walks -----------------------------------------------------------------

def test_rw_config_validation():
    with pytest.raises(ValueError):
        RWConfig(-1, ("on",))
    with pytest.raises(ValueError):
        RWConfig(3, ())
    with pytest.raises(ValueError):
        RWConfig(3, ("on",), noop_prob=1.0)


def test_zero_walk_is_already_solved():
    M = generator_mdp("gripper", [3])
    s = sample_rw_problem(M, RWConfig(0, ("at",)), random.Random(0))
    assert is_goal_state(s)
    assert {f[0] for f in s.goal} == {"gat"}


def _reachable_goal(M, s, cap=50_000):
    seen, queue = {s}, deque([s])
    while queue:
        x = queue.popleft()
        if is_goal_state(x):
            return True
        for a in M.domain.legal_actions(x):
            for _, y in M.domain.outcome_distribution(x, a):
                if y not in seen and len(seen) < cap:
                    seen.add(y)
                    queue.append(y)
    return False


@pytest.mark.parametrize("name,pred,size", [("gripper", "at", 2), ("blocks", "on", 4)])
def test_rw_goals_are_reachable(name, pred, size):
    M = generator_mdp(name, [size])
    sample = rw_sampler(M, RWConfig(6, (pred,)))
    rng = random.Random(1)
    for _ in range(10):
        s = sample(rng)
        assert all(f[0] == "g" + pred for f in s.goal)
        assert _reachable_goal(M, s)


def test_rw_sampler_reproducible():
    M = generator_mdp("blocks", [5])
    sample = rw_sampler(M, RWConfig(10, ("on",)))
    assert sample(random.Random(4)) == sample(random.Random(4))


# -- evaluation -------------------------------------------------------------------

def test_evaluation_counts_and_lengths():
    M = generator_mdp("gripper", [2])
    rep = evaluate_policy(_hand(M), [gripper_problem(2)] * 5, 5, 50, M, random.Random(0))
    assert rep.success_ratio == 1.0 and rep.solved == 5
    assert rep.average_length == 5.0
    rep = evaluate_policy(_hand(M), [gripper_problem(2)], 1, 3, M, random.Random(0))
    assert rep.success_ratio == 0.0 and rep.average_length is None
    with pytest.raises(ValueError):
        evaluate_policy(_hand(M), [], 0, 0, M, random.Random(0))


def test_report_key_orders_success_then_length():
    a = EvalReport(0.9, 12.0, 10, 50, 9)
    b = EvalReport(0.9, 10.0, 10, 50, 9)
    c = EvalReport(0.5, 3.0, 10, 50, 5)
    assert b.key() > a.key() > c.key()


def test_hand_gripper_policy_is_exhaustively_correct():
    """From every state reachable in Gripper(1..3) the policy reaches the goal."""
    for balls in (1, 2, 3):
        M = generator_mdp("gripper", [balls])
        tab, states, acts = flatten_relational(M, [gripper_problem(balls)])
        pi = _hand(M)
        for s in states:
            x, steps = s, 0
            while not is_goal_state(x) and steps < 40:
                x, _ = M.step(x, pi(x), random.Random(0))
                steps += 1
            assert is_goal_state(x), s


@pytest.mark.parametrize("name,domain_fixture", [("gripper", "gripper"), ("blocks", "blocks"),
                                                 ("briefcase", "briefcase")])
def test_listed_policies_execute(name, domain_fixture, request):
    domain = request.getfixturevalue(domain_fixture)
    pol = DecisionListPolicy(fixture_policy(name, domain), domain)
    M = RelationalMDP(domain)
    rng = random.Random(0)
    for _ in range(20):
        if name == "briefcase":
            s = briefcase_problem(rng)
        elif name == "blocks":
            s = blocks_problem(rng.randrange(3, 9), rng)
        else:
            s = gripper_problem(rng.randrange(1, 6))
        for _ in range(60):
            if M.is_terminal(s):
                break
            a = pol(s, rng)
            assert a in domain.legal_actions(s)
            s, _ = M.step(s, a, rng)


def briefcase_problem(rng):
    locs = [f"l{i}" for i in range(rng.randrange(2, 5))]
    objs = [f"p{i}" for i in range(rng.randrange(1, 4))]
    world = {("location", l) for l in locs} | {("portable", p) for p in objs}
    world |= {("object", x) for x in locs + objs}
    world.add(("is-at", rng.choice(locs)))
    world |= {("at", p, rng.choice(locs)) for p in objs}
    goal = {("gat", p, rng.choice(locs)) for p in objs} | {("gis-at", rng.choice(locs))}
    return RelState(world, goal, locs + objs)


# -- exact solver -----------------------------------------------------------------

def test_value_iteration_beats_every_policy():
    M = random_tabular_mdp(3, 2, np.random.default_rng(0), discount=0.8)
    V, pi = value_iteration(M)
    for p in all_tabular_policies(M):
        assert np.all(exact_solve(M, p).V <= V + 1e-8)
    assert np.allclose(exact_solve(M, pi).V, V, atol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_policy_improvement_never_hurts(seed):
    M = random_tabular_mdp(6, 3, np.random.default_rng(seed), discount=0.9, n_terminal=1)
    pi = np.random.default_rng(seed + 100).integers(0, 3, 6)
    sol = exact_solve(M, pi)
    better = exact_solve(M, sol.improved)
    assert np.all(better.V >= sol.V - 1e-8)
    if not np.array_equal(sol.improved, pi):
        assert np.any(better.V > sol.V + 1e-8)


def test_flatten_counts_gripper_states():
    # robot room (2) x ball places (2 rooms + 2 grippers, one ball per gripper),
    # minus the robot in rooma with both balls delivered: only reachable
    # through the absorbing goal state
    M = generator_mdp("gripper", [2])
    tab, states, acts = flatten_relational(M, [gripper_problem(2)])
    assert len(states) == 2 * (4 * 4 - 2) - 1
    assert tab.terminal.sum() == 1


# -- API and the bootstrapped loop --------------------------------------------------

def test_config_checks():
    with pytest.raises(ValueError):
        LRWConfig(tau=0.5, delta=0.6)
    with pytest.raises(ValueError):
        LRWConfig(max_walk=0)
    assert LRWConfig().limit(10) == 200 and LRWConfig().limit(80) == 320
    assert LRWConfig(step_limit=7).limit(80) == 7


def _run(max_walk=10, **kw):
    M = generator_mdp("gripper", [2])
    cfg = LRWConfig(max_walk=max_walk, goal_predicates=("at",), sr_samples=5,
                    heldout_samples=5, n_trajectories=2, **kw)
    return LRWRun(M, cfg, RandomPolicy(M), random.Random(0), learn=lambda ex: _hand(M))


def test_walk_length_grid():
    run = _run(max_walk=50)
    assert run.candidates(1) == [2, 4, 8, 16, 32, 50]
    assert run.candidates(3) == [6, 12, 24, 48, 50]
    assert run.candidates(40) == [50]


def test_escalation_picks_first_hard_length(monkeypatch):
    run = _run(max_walk=50)
    table = {1: 0.95, 2: 0.85, 4: 0.7, 8: 0.1}
    monkeypatch.setattr(run, "success", lambda pol, n, problems=None:
                        EvalReport(table.get(n, 0.0), None, 5, 200, 0))
    run.escalate()
    assert run.n == 4
    run.escalate()              # SR 0.7 is not above tau: stay
    assert run.n == 4


def test_escalation_jumps_to_max_when_nothing_is_hard(monkeypatch):
    run = _run(max_walk=50)
    monkeypatch.setattr(run, "success", lambda pol, n, problems=None:
                        EvalReport(0.95, 1.0, 5, 200, 5))
    run.escalate()
    assert run.n == 50


def test_loop_stops_after_patience_at_max_walk():
    run = _run(max_walk=10, max_iterations=10, stop_patience=2)
    best, rows = run.run()
    assert rows[0].sr_N == 1.0
    assert len(rows) == 3
    assert [r.iteration for r in rows] == [1, 2, 3]
    assert rows[-1].walk_length == 10


def test_api_keeps_best_and_stops():
    M = generator_mdp("gripper", [1])
    reports = iter([EvalReport(x, 1.0, 1, 1, 1) for x in (0.2, 0.9, 0.5, 0.4, 0.3, 1.0)])
    learned = []

    class Tagged(RandomPolicy):
        def __init__(self, tag):
            super().__init__(M)
            self.tag = tag

    def learn(examples):
        learned.append(len(learned))
        return Tagged(len(learned))

    best, reps = api(M, RandomPolicy(M), learn, RolloutConfig(horizon=3), 2,
                     lambda p: next(reports), random.Random(0), stop_patience=3)
    assert [r.success_ratio for r in reps] == [0.2, 0.9, 0.5, 0.4, 0.3]
    assert best.tag == 2


def test_api_step_records_examples():
    M = generator_mdp("gripper", [2])
    pol, exs = api_step(M, RandomPolicy(M), M.sample_initial, RolloutConfig(horizon=4), 3,
                        lambda e: "learned", random.Random(0))
    assert pol == "learned" and 0 < len(exs) <= 12


def test_csv_report_format():
    rows = [IterationRow(1, 4, 0.5, 7.25, 0.25, None, 3, 40)]
    assert report_csv(rows) == ("iteration,walk_length,sr_n,al_n,sr_N,al_N,rules,examples\n"
                                "1,4,0.5000,7.2500,0.2500,,3,40\n")


def test_estimator_fit_and_protocol():
    M = generator_mdp("gripper", [2])
    est = LRWAPI(max_walk=6, goal_predicates=("at",), sr_samples=10, heldout_samples=10,
                 n_trajectories=10, depth=3, max_iterations=2, random_state=3)
    assert clone(est).get_params() == est.get_params()
    est.fit(M)
    assert len(est.history_) <= 2 and 1 <= est.best_iteration_ <= len(est.history_)
    assert est.report_csv().startswith("iteration,")
    summary = est.summary()
    assert summary["random_state"] == 3 and len(summary["rows"]) == len(est.history_)
    s = M.sample_initial(random.Random(0))
    assert est.predict([s]) == [est.policy_(s)]
    with pytest.raises(ValueError):
        LRWAPI().fit(M)


def test_estimator_is_reproducible():
    M = generator_mdp("gripper", [2])
    kw = dict(max_walk=6, goal_predicates=("at",), sr_samples=5, heldout_samples=5,
              n_trajectories=5, depth=2, max_iterations=2, random_state=11)
    a, b = LRWAPI(**kw).fit(M), LRWAPI(**kw).fit(M)
    assert a.report_csv() == b.report_csv()
    assert a.decision_list_ == b.decision_list_
