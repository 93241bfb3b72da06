"""Random-walk problem distributions."""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..mdp import RelState, world_to_goal


@dataclass(frozen=True)
class RWConfig:
    """Walk length ``n``, per-step no-op probability and goal predicates ``G``.

    ``goal_predicates`` holds world predicate names; the goal keeps the
    ``g`` copies of walk-end facts over these predicates.
    """

    walk_length: int
    goal_predicates: tuple
    noop_prob: float = 0.1

    def __post_init__(self):
        if self.walk_length < 0:
            raise ValueError("walk length must be >= 0")
        if not self.goal_predicates:
            raise ValueError("goal predicate set must be nonempty")
        if not 0.0 < self.noop_prob < 1.0:
            raise ValueError("no-op probability must lie in (0, 1)")
        object.__setattr__(self, "goal_predicates", tuple(self.goal_predicates))


def random_walk(domain, s0: RelState, n: int, noop_prob: float, rng: random.Random):
    """World facts after ``n`` steps of uniformly random legal actions."""
    s = s0
    for _ in range(n):
        if rng.random() < noop_prob:
            continue
        legal = domain.legal_actions(s)
        if not legal:
            continue
        a = legal[rng.randrange(len(legal))]
        s = s.with_world(domain.successor_world(s.world, a, rng))
    return s.world


def sample_rw_problem(M, rw: RWConfig, rng: random.Random) -> RelState:
    """Draw ``s0`` from ``M``'s initial sampler, walk ``n`` random steps and
    return ``s0``'s world with the walk's final facts over ``G`` as goal."""
    s0 = M.sample_initial(rng)
    start = RelState(s0.world, (), s0.objects)
    end = random_walk(M.domain, start, rw.walk_length, rw.noop_prob, rng)
    keep = set(rw.goal_predicates)
    goal = world_to_goal(f for f in end if f[0] in keep)
    return RelState(s0.world, goal, s0.objects)


def rw_sampler(M, rw: RWConfig):
    """A problem source ``rng -> state`` for the random-walk distribution."""
    def sample(rng):
        return sample_rw_problem(M, rw, rng)
    return sample
