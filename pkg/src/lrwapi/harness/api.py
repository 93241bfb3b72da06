"""Approximate policy iteration and its random-walk bootstrapped driver."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field

from sklearn.base import BaseEstimator

from ..learner import DecisionListLearner
from ..rollout import RolloutConfig, flatten, improved_trajectories
from ..taxonomy.syntax import DecisionList
from .evaluation import EvalReport, evaluate_policy
from .policies import DecisionListPolicy, RandomPolicy
from .randomwalk import RWConfig, rw_sampler

log = logging.getLogger(__name__)

REPORT_FIELDS = ("iteration", "walk_length", "sr_n", "al_n", "sr_N", "al_N",
                 "rules", "examples")


@dataclass
class IterationRow:
    iteration: int
    walk_length: int
    sr_n: float
    al_n: float | None
    sr_N: float
    al_N: float | None
    rules: int
    examples: int

    def csv_row(self) -> list:
        def fmt(x):
            if x is None:
                return ""
            return f"{x:.4f}" if isinstance(x, float) else str(x)
        return [fmt(getattr(self, f)) for f in REPORT_FIELDS]


def report_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue()


def api_step(M, policy, problems, rollout: RolloutConfig, n_trajectories: int, learn,
             rng: random.Random, trajectory_length=None):
    """One improvement step: improved trajectories from ``problems``, then learn.

    Args:
        problems: sampler ``rng -> state`` for trajectory start states.
        learn: callable mapping a list of training examples to a policy.

    Returns:
        ``(new_policy, examples)``.
    """
    starts = [problems(random.Random(rng.getrandbits(64))) for _ in range(n_trajectories)]
    trajs = improved_trajectories(n_trajectories, rollout, M, policy, rng,
                                  length=trajectory_length, starts=starts)
    examples = flatten(trajs)
    return learn(examples), examples


def api(M, policy0, learn, rollout: RolloutConfig, n_trajectories: int, evaluate,
        rng: random.Random, max_iterations: int = 10, stop_patience: int = 3,
        problems=None, trajectory_length=None):
    """Iterate improvement steps; keep the best policy under ``evaluate``.

    Args:
        evaluate: callable ``policy -> EvalReport`` on a fixed held-out set.
        problems: trajectory start sampler (``M.sample_initial`` by default).

    Returns:
        ``(best_policy, reports)`` where ``reports[i]`` evaluates iteration
        ``i + 1``.
    """
    problems = problems or M.sample_initial
    policy = policy0
    best, best_key = policy0, None
    reports, stale = [], 0
    for _ in range(max_iterations):
        policy, _ = api_step(M, policy, problems, rollout, n_trajectories, learn, rng,
                             trajectory_length)
        rep = evaluate(policy)
        reports.append(rep)
        if best_key is None or rep.key() > best_key:
            best, best_key, stale = policy, rep.key(), 0
        else:
            stale += 1
            if stale >= stop_patience:
                break
    return best, reports


@dataclass
class LRWConfig:
    """Settings of the bootstrapped random-walk loop."""

    max_walk: int = 10_000
    goal_predicates: tuple = ()
    tau: float = 0.9
    delta: float = 0.1
    sr_samples: int = 100
    heldout_samples: int = 100
    n_trajectories: int = 100
    width: int = 1
    horizon: int = 30
    trajectory_length: int | None = None
    discount: float = 1.0
    depth: int = 2
    max_literals: int = 3
    beam_width: int = 5
    max_candidates: int = 200_000
    max_iterations: int = 10
    stop_patience: int = 3
    noop_prob: float = 0.1
    grid_factor: float = 2.0
    step_limit: int | None = None
    initial_walk: int = 1

    def __post_init__(self):
        if not 0 < self.delta < self.tau <= 1:
            raise ValueError("need 0 < delta < tau <= 1")
        if self.max_walk < 1:
            raise ValueError("max_walk must be >= 1")
        if self.grid_factor <= 1:
            raise ValueError("grid_factor must exceed 1")

    def limit(self, n: int) -> int:
        return self.step_limit if self.step_limit is not None else max(4 * n, 200)


class LRWRun:
    """State of one bootstrapped run; see :func:`lrw_api`."""

    def __init__(self, M, cfg: LRWConfig, policy0, rng: random.Random, learn=None):
        self.M = M
        self.cfg = cfg
        self.rng = rng
        self.policy = policy0
        self.learn = learn or self._default_learn
        self.n = max(1, min(cfg.initial_walk, cfg.max_walk))
        self.rows: list = []
        self.policies: list = []
        self.best_index = None
        self.heldout = self.problems(cfg.max_walk, cfg.heldout_samples)

    def _default_learn(self, examples):
        est = DecisionListLearner(depth=self.cfg.depth, max_literals=self.cfg.max_literals,
                                  beam_width=self.cfg.beam_width,
                                  max_candidates=self.cfg.max_candidates)
        est.fit(examples, domain=self.M.domain)
        return DecisionListPolicy(est.policy_, self.M.domain)

    def rw(self, n: int) -> RWConfig:
        return RWConfig(n, self.cfg.goal_predicates, self.cfg.noop_prob)

    def problems(self, n: int, count: int) -> list:
        sampler = rw_sampler(self.M, self.rw(n))
        return [sampler(random.Random(self.rng.getrandbits(64))) for _ in range(count)]

    def success(self, policy, n: int, problems=None) -> EvalReport:
        problems = problems if problems is not None else self.problems(n, self.cfg.sr_samples)
        return evaluate_policy(policy, problems, len(problems), self.cfg.limit(n), self.M,
                               random.Random(self.rng.getrandbits(64)))

    def candidates(self, n: int) -> list:
        out, c = [], n
        while True:
            c = max(c + 1, math.ceil(c * self.cfg.grid_factor))
            if c >= self.cfg.max_walk:
                out.append(self.cfg.max_walk)
                return out
            out.append(c)

    def escalate(self):
        """Raise ``n`` when the current policy masters ``RW_n``."""
        cfg = self.cfg
        if self.n >= cfg.max_walk:
            return
        sr = self.success(self.policy, self.n).success_ratio
        if sr <= cfg.tau:
            return
        chosen = cfg.max_walk
        for c in self.candidates(self.n):
            if self.success(self.policy, c).success_ratio < cfg.tau - cfg.delta:
                chosen = c
                break
        log.info("walk length %d -> %d (SR %.2f)", self.n, chosen, sr)
        self.n = chosen

    def iterate(self) -> IterationRow:
        cfg = self.cfg
        self.escalate()
        rollout = RolloutConfig(cfg.width, cfg.horizon, cfg.discount)
        sampler = rw_sampler(self.M, self.rw(self.n))
        self.policy, examples = api_step(self.M, self.policy, sampler, rollout,
                                         cfg.n_trajectories, self.learn, self.rng,
                                         cfg.trajectory_length)
        on_n = self.success(self.policy, self.n)
        on_N = self.success(self.policy, cfg.max_walk, self.heldout)
        rules = len(getattr(self.policy, "decision_list", ()))
        row = IterationRow(len(self.rows) + 1, self.n, on_n.success_ratio,
                           on_n.average_length, on_N.success_ratio, on_N.average_length,
                           rules, len(examples))
        self.rows.append(row)
        self.policies.append(self.policy)
        key = on_N.key()
        if self.best_index is None or key > self._key(self.best_index):
            self.best_index = len(self.rows) - 1
        log.info("iteration %d: n=%d SR_n=%.2f SR_N=%.2f rules=%d", row.iteration,
                 row.walk_length, row.sr_n, row.sr_N, rules)
        return row

    def _key(self, i):
        r = self.rows[i]
        return (r.sr_N, -(r.al_N if r.al_N is not None else math.inf))

    def run(self):
        cfg = self.cfg
        stale = 0
        for _ in range(cfg.max_iterations):
            before = self.best_index
            self.iterate()
            if self.n >= cfg.max_walk:
                stale = 0 if self.best_index != before else stale + 1
                if stale >= cfg.stop_patience:
                    break
        return self.policies[self.best_index], self.rows


def lrw_api(M, cfg: LRWConfig, policy0=None, rng: random.Random | None = None,
            learn=None):
    """Bootstrapped approximate policy iteration over random-walk problems.

    Returns:
        ``(best_policy, rows)`` with one :class:`IterationRow` per iteration.
    """
    rng = rng if rng is not None else random.Random(0)
    policy0 = policy0 if policy0 is not None else RandomPolicy(M)
    return LRWRun(M, cfg, policy0, rng, learn).run()


class LRWAPI(BaseEstimator):
    """Estimator wrapper: ``fit(M)`` runs the bootstrapped loop on MDP ``M``.

    Hyperparameters mirror :class:`LRWConfig`; ``random_state`` seeds every
    random stream of the run.
    """

    def __init__(self, max_walk=10_000, goal_predicates=(), tau=0.9, delta=0.1,
                 sr_samples=100, heldout_samples=100, n_trajectories=100, width=1,
                 horizon=30, trajectory_length=None, discount=1.0, depth=2,
                 max_literals=3, beam_width=5, max_candidates=200_000,
                 max_iterations=10, stop_patience=3, noop_prob=0.1, grid_factor=2.0,
                 step_limit=None, initial_walk=1, random_state=0):
        self.max_walk = max_walk
        self.goal_predicates = goal_predicates
        self.tau = tau
        self.delta = delta
        self.sr_samples = sr_samples
        self.heldout_samples = heldout_samples
        self.n_trajectories = n_trajectories
        self.width = width
        self.horizon = horizon
        self.trajectory_length = trajectory_length
        self.discount = discount
        self.depth = depth
        self.max_literals = max_literals
        self.beam_width = beam_width
        self.max_candidates = max_candidates
        self.max_iterations = max_iterations
        self.stop_patience = stop_patience
        self.noop_prob = noop_prob
        self.grid_factor = grid_factor
        self.step_limit = step_limit
        self.initial_walk = initial_walk
        self.random_state = random_state

    def config(self) -> LRWConfig:
        params = self.get_params()
        params.pop("random_state")
        params["goal_predicates"] = tuple(params["goal_predicates"])
        return LRWConfig(**params)

    def fit(self, M, y=None):
        t0 = time.perf_counter()
        cfg = self.config()
        if not cfg.goal_predicates:
            raise ValueError("goal_predicates must name at least one predicate")
        run = LRWRun(M, cfg, RandomPolicy(M), random.Random(self.random_state))
        best, rows = run.run()
        self.policy_ = best
        self.decision_list_ = getattr(best, "decision_list", DecisionList(()))
        self.history_ = rows
        self.best_iteration_ = run.best_index + 1
        self.walk_lengths_ = [r.walk_length for r in rows]
        self.fit_seconds_ = time.perf_counter() - t0
        return self

    def predict(self, states):
        return [self.policy_(s, None) for s in states]

    def report_csv(self) -> str:
        return report_csv(self.history_)

    def summary(self) -> dict:
        return {
            "config": asdict(self.config()),
            "random_state": self.random_state,
            "best_iteration": self.best_iteration_,
            "rows": [asdict(r) for r in self.history_],
            "fit_seconds": round(self.fit_seconds_, 3),
        }
