"""Monte-Carlo policy rollout and improved-trajectory generation.

A simulator ``M`` provides ``legal_actions(s)``, ``step(s, a, rng)``,
``is_terminal(s)``, ``sample_initial(rng)`` and a ``discount``. A policy is a
callable ``policy(s, rng) -> action or None``; policies exposing
``deterministic = True`` have their decisions memoized per state.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .mdp import GroundAction, RelState, format_fact, parse_action, parse_fact

# Reward per step while a policy has no action to take in a non-terminal state.
STUCK_REWARD = -1.0


class SelectionError(ValueError):
    """Raised when selecting from an empty estimate map."""


@dataclass(frozen=True)
class RolloutConfig:
    """Sampling width ``w``, horizon ``h`` and discount ``gamma``.

    ``delta`` switches action selection in improved trajectories from the
    plain argmax to the thresholded least-action rule (``delta=0`` is the
    argmax with least-action tie-breaking).
    """

    width: int = 1
    horizon: int = 20
    discount: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.horizon < 1:
            raise ValueError("width and horizon must be >= 1")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


@dataclass
class TrainingExample:
    """A state, the action the base policy takes there, and Q estimates."""

    state: Any
    prior_action: Any
    q_estimates: dict

    def best_value(self) -> float:
        return max(self.q_estimates.values())


@dataclass
class Trajectory:
    examples: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    discount: float = 1.0

    @property
    def value(self) -> float:
        """Cumulative discounted reward of the executed actions."""
        return sum(r * self.discount ** i for i, r in enumerate(self.rewards))

    def __len__(self):
        return len(self.examples)


@dataclass(frozen=True)
class DeltaSelection:
    threshold: float
    selected: tuple
    chosen: Any


def delta_action_select(q_estimates: dict, delta: float = 0.0) -> DeltaSelection:
    """Actions within ``delta`` of the best estimate, and the least of them.

    Raises:
        SelectionError: if ``q_estimates`` is empty.
    """
    if not q_estimates:
        raise SelectionError("no actions to select from")
    best = max(q_estimates.values())
    selected = tuple(sorted(a for a, q in q_estimates.items() if best - q <= delta))
    return DeltaSelection(delta, selected, selected[0])


class _Memo:
    """Per-call caches valid while the policy and dynamics are deterministic."""

    LIMIT = 250_000

    def __init__(self, M, policy):
        self.policy_ok = bool(getattr(policy, "deterministic", False))
        self.step_ok = bool(getattr(M, "deterministic", False))
        self.decisions: dict = {}
        self.steps: dict = {}

    def act(self, policy, s, rng):
        if not self.policy_ok:
            return policy(s, rng)
        a = self.decisions.get(s, _MISSING)
        if a is _MISSING:
            if len(self.decisions) > self.LIMIT:
                self.decisions.clear()
            a = self.decisions[s] = policy(s, rng)
        return a

    def step(self, M, s, a, rng):
        if not self.step_ok:
            return M.step(s, a, rng)
        key = (s, a)
        got = self.steps.get(key)
        if got is None:
            if len(self.steps) > self.LIMIT:
                self.steps.clear()
            got = self.steps[key] = M.step(s, a, rng)
        return got


_MISSING = object()


def _simulate(M, policy, s, a, horizon, gamma, rng, memo):
    s2, r = memo.step(M, s, a, rng)
    total = r
    disc = 1.0
    for _ in range(1, horizon):
        disc *= gamma
        if M.is_terminal(s2):
            break
        b = memo.act(policy, s2, rng)
        if b is None:
            total += disc * STUCK_REWARD
            continue
        s2, r = memo.step(M, s2, b, rng)
        total += disc * r
    return total


def policy_rollout(policy, s, cfg: RolloutConfig, M, rng: random.Random, _memo=None) -> dict:
    """Estimate ``Q_h(s, a)`` for every legal action ``a`` by simulation.

    Each estimate averages ``w`` runs of: take ``a``, then follow ``policy``
    for ``h - 1`` more steps, summing discounted rewards. Terminal states
    give all-zero estimates.
    """
    legal = M.legal_actions(s)
    if M.is_terminal(s):
        return {a: 0.0 for a in legal}
    memo = _memo if _memo is not None else _Memo(M, policy)
    out = {}
    for a in legal:
        acc = 0.0
        for _ in range(cfg.width):
            acc += _simulate(M, policy, s, a, cfg.horizon, cfg.discount, rng, memo)
        out[a] = acc / cfg.width
    return out


def improved_trajectory(policy, cfg: RolloutConfig, M, rng: random.Random,
                        start=None, length: int | None = None, _memo=None) -> Trajectory:
    """One trajectory of the rollout policy, annotated with Q estimates.

    Args:
        start: initial state; drawn from ``M.sample_initial`` when omitted.
        length: number of steps (defaults to ``cfg.horizon``).
    """
    memo = _memo if _memo is not None else _Memo(M, policy)
    s = start if start is not None else M.sample_initial(rng)
    traj = Trajectory(discount=cfg.discount)
    for _ in range(length if length is not None else cfg.horizon):
        if M.is_terminal(s):
            break
        q = policy_rollout(policy, s, cfg, M, rng, _memo=memo)
        if not q:
            break
        prior = memo.act(policy, s, rng)
        traj.examples.append(TrainingExample(s, prior, q))
        a = delta_action_select(q, cfg.delta).chosen
        s, r = M.step(s, a, rng)
        traj.actions.append(a)
        traj.rewards.append(r)
    return traj


def improved_trajectories(n: int, cfg: RolloutConfig, M, policy, rng: random.Random,
                          length: int | None = None, starts=None) -> list:
    """``n`` independent improved trajectories, in index order.

    Each trajectory gets its own random stream derived from ``rng`` up front,
    so results do not depend on how the work is scheduled.
    """
    seeds = [rng.getrandbits(64) for _ in range(n)]
    memo = _Memo(M, policy)
    out = []
    for k, seed in enumerate(seeds):
        sub = random.Random(seed)
        start = starts[k] if starts is not None else None
        out.append(improved_trajectory(policy, cfg, M, sub, start=start,
                                       length=length, _memo=memo))
    return out


def flatten(trajectories) -> list:
    """The union of all trajectory elements (order kept for reproducibility)."""
    return [ex for t in trajectories for ex in t.examples]


# -- vectorized rollout on tabular MDPs ------------------------------------------

def tabular_rollout(P: np.ndarray, R: np.ndarray, policy: np.ndarray, s: int,
                    horizon: int, width: int, gamma: float,
                    rng: np.random.Generator, terminal=None, legal=None) -> np.ndarray:
    """Vectorized estimates of ``Q_h(s, a)`` for a tabular MDP.

    Args:
        P: transitions, shape ``(A, S, S)``.
        R: rewards, shape ``(S, A)``.
        policy: action per state, shape ``(S,)``.
        terminal: optional boolean mask of absorbing zero-reward states.
        legal: optional ``(S, A)`` mask; estimates of illegal actions are nan.

    Returns:
        Array of shape ``(A,)``.
    """
    n_actions, n_states, _ = P.shape
    cum = np.cumsum(P, axis=2)
    cum[..., -1] = 1.0
    term = np.zeros(n_states, bool) if terminal is None else np.asarray(terminal, bool)
    out = np.full(n_actions, np.nan)
    for a in range(n_actions):
        if legal is not None and not legal[s, a]:
            continue
        if term[s]:
            out[a] = 0.0
            continue
        states = np.full(width, s)
        acts = np.full(width, a)
        total = np.zeros(width)
        disc = 1.0
        for i in range(horizon):
            live = ~term[states]
            total += disc * np.where(live, R[states, acts], 0.0)
            u = rng.random(width)
            nxt = (u[:, None] >= cum[acts, states]).sum(axis=1)
            states = np.where(live, np.minimum(nxt, n_states - 1), states)
            acts = policy[states]
            disc *= gamma
        out[a] = total.mean()
    return out


# -- training-set files -------------------------------------------------------------

def state_record(s: RelState) -> dict:
    """JSON-ready form of a state."""
    return {"world": sorted(format_fact(f) for f in s.world),
            "goal": sorted(format_fact(f) for f in s.goal),
            "objects": list(s.objects)}


def state_from_record(rec: dict) -> RelState:
    return RelState((parse_fact(f) for f in rec["world"]),
                    (parse_fact(f) for f in rec["goal"]), rec["objects"])


def write_training_set(examples, fh) -> None:
    """Write examples as JSON lines (one example per line)."""
    for ex in examples:
        rec = {
            "state": state_record(ex.state),
            "prior": str(ex.prior_action) if ex.prior_action is not None else None,
            "q": [[str(a), q] for a, q in ex.q_estimates.items()],
        }
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_training_set(fh) -> list:
    out = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        s = state_from_record(rec["state"])
        prior = parse_action(rec["prior"]) if rec["prior"] else None
        q = {parse_action(a): float(v) for a, v in rec["q"]}
        if q:
            out.append(TrainingExample(s, prior, q))
    return out


def hoeffding_tolerance(v_max: float, n: int, width: int) -> float:
    """``3 * Vmax / sqrt(n * w)``, the tolerance used for unbiasedness checks."""
    return 3.0 * v_max / math.sqrt(n * width)
