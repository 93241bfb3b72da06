"""Success ratio and average solution length of a policy."""

from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass(frozen=True)
class EvalReport:
    """``success_ratio`` is solved/sample_count; ``average_length`` is the
    mean accumulated cost over solved episodes (None if none solved)."""

    success_ratio: float
    average_length: float | None
    sample_count: int
    step_limit: int
    solved: int

    def key(self):
        """Ordering key: higher success first, then shorter solutions."""
        al = self.average_length if self.average_length is not None else float("inf")
        return (self.success_ratio, -al)


def run_episode(policy, s, M, step_limit: int, rng: random.Random):
    """Execute ``policy`` from ``s``. Returns ``(solved, cost, steps)``."""
    cost = 0.0
    for t in range(step_limit):
        if M.is_terminal(s):
            return True, cost, t
        a = policy(s, rng)
        if a is None:
            return False, cost, t
        s, r = M.step(s, a, rng)
        cost -= r
    return M.is_terminal(s), cost, step_limit


def evaluate_policy(policy, problems, sample_count: int, step_limit: int, M,
                    rng: random.Random) -> EvalReport:
    """Estimate SR and AL of ``policy``.

    Args:
        problems: a sequence of states (the first ``sample_count`` are used)
            or a sampler ``rng -> state``.
    """
    if step_limit < 1:
        raise ValueError("step limit must be >= 1")
    if callable(problems):
        seeds = [rng.getrandbits(64) for _ in range(sample_count)]
        states = [problems(random.Random(sd)) for sd in seeds]
    else:
        states = list(problems)[:sample_count]
        sample_count = len(states)
    solved, total = 0, 0.0
    for s in states:
        ok, cost, _ = run_episode(policy, s, M, step_limit, random.Random(rng.getrandbits(64)))
        if ok:
            solved += 1
            total += cost
    sr = solved / sample_count if sample_count else 0.0
    al = total / solved if solved else None
    return EvalReport(sr, al, sample_count, step_limit, solved)
