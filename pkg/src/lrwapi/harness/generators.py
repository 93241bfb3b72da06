"""Seeded problem generators for the shipped domains."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib import resources

from ..mdp import Domain, RelState, RelationalMDP, world_to_goal
from ..parsing.domain import load_domain


class ConfigError(ValueError):
    """Raised for unknown generator names or bad size parameters."""


@dataclass(frozen=True)
class GeneratorSpec:
    """A generator name with its size parameters and a seed."""

    domain: str
    size: dict = field(default_factory=dict)
    seed: int = 0


def domain_text(name: str) -> str:
    try:
        return resources.files("lrwapi.domains").joinpath(f"{name}.pddl").read_text()
    except FileNotFoundError:
        raise ConfigError(f"no shipped domain named {name!r}") from None


_DOMAINS: dict = {}


def shipped_domain(name: str) -> Domain:
    if name not in _DOMAINS:
        _DOMAINS[name] = load_domain(domain_text(name))
    return _DOMAINS[name]


def random_towers(blocks, rng: random.Random) -> list:
    """Partition ``blocks`` into towers (bottom first), uniformly shuffled."""
    order = list(blocks)
    rng.shuffle(order)
    towers = []
    for b in order:
        # start a new tower or put b on top of an existing one, weighted so
        # every tower set stays reachable
        k = rng.randrange(len(towers) + 1)
        if k == len(towers):
            towers.append([b])
        else:
            towers[k].append(b)
    return towers


def tower_facts(towers) -> set:
    facts = set()
    for t in towers:
        facts.add(("on-table", t[0]))
        for below, above in zip(t, t[1:]):
            facts.add(("on", above, below))
        facts.add(("clear", t[-1]))
    return facts


def block_names(n: int) -> list:
    width = len(str(n))
    return [f"b{i:0{width}d}" for i in range(1, n + 1)]


def blocks_problem(n: int, rng: random.Random) -> RelState:
    """Random initial towers, hand empty; goal is a random tower set (on only)."""
    names = block_names(n)
    world = tower_facts(random_towers(names, rng)) | {("handempty",)}
    goal = {f for f in tower_facts(random_towers(names, rng)) if f[0] == "on"}
    return RelState(world, world_to_goal(goal), names)


def gripper_problem(balls: int, rng: random.Random | None = None) -> RelState:
    """All balls in room ``rooma``, robot there with two free grippers;
    the goal puts every ball in ``roomb``."""
    names = [f"ball{i}" for i in range(1, balls + 1)]
    world = {("room", "rooma"), ("room", "roomb"), ("gripper", "left"),
             ("gripper", "right"), ("at-robby", "rooma"), ("free", "left"),
             ("free", "right")}
    for b in names:
        world |= {("ball", b), ("at", b, "rooma")}
    goal = {("at", b, "roomb") for b in names}
    return RelState(world, world_to_goal(goal), names + ["rooma", "roomb", "left", "right"])


def clear_red_problem(n: int, rng: random.Random, red_prob: float = 0.4) -> RelState:
    """Random towers with random red blocks; the goal clears every red block.

    ``on(below, above)`` argument order, as declared by the clear-red domain.
    At least one red block is buried so the problem is not already solved.
    """
    names = block_names(n)
    while True:
        towers = random_towers(names, rng)
        red = {b for b in names if rng.random() < red_prob}
        buried = [b for t in towers for b in t[:-1]]
        if red & set(buried):
            break
    world = {("handempty",)} | {("red", b) for b in red}
    for t in towers:
        world.add(("on-table", t[0]))
        for below, above in zip(t, t[1:]):
            world.add(("on", below, above))
        world.add(("clear", t[-1]))
    goal = {("clear", b) for b in sorted(red)}
    return RelState(world, world_to_goal(goal), names)


GENERATORS = {
    "blocks": ("blocks", "blocks", blocks_problem),
    "gripper": ("gripper", "balls", gripper_problem),
    "clear-red": ("clear-red", "blocks", clear_red_problem),
}

# goal predicates kept by random-walk problems of each domain
GOAL_PREDICATES = {"blocks": ("on",), "gripper": ("at",), "clear-red": ("clear",)}


def generate_problem(spec: GeneratorSpec, rng: random.Random | None = None) -> RelState:
    """Draw one problem. ``rng`` defaults to a stream seeded by ``spec.seed``.

    Raises:
        ConfigError: for an unknown generator or missing size parameter.
    """
    if spec.domain not in GENERATORS:
        raise ConfigError(f"unknown generator {spec.domain!r}; known: {sorted(GENERATORS)}")
    _, key, fn = GENERATORS[spec.domain]
    if key not in spec.size:
        raise ConfigError(f"generator {spec.domain!r} needs size parameter {key!r}")
    n = int(spec.size[key])
    if n < 1:
        raise ConfigError(f"size parameter {key!r} must be >= 1, got {n}")
    rng = rng if rng is not None else random.Random(spec.seed)
    return fn(n, rng)


def size_sampler(domain: str, sizes) -> callable:
    """Initial-state sampler drawing a size uniformly from ``sizes`` each call."""
    sizes = list(sizes)
    if not sizes or min(sizes) < 1:
        raise ConfigError(f"sizes must be a nonempty list of positive integers, got {sizes}")
    if domain not in GENERATORS:
        raise ConfigError(f"unknown generator {domain!r}; known: {sorted(GENERATORS)}")
    _, key, fn = GENERATORS[domain]

    def sample(rng: random.Random) -> RelState:
        n = sizes[rng.randrange(len(sizes))] if len(sizes) > 1 else sizes[0]
        return fn(n, rng)

    return sample


def generator_mdp(domain: str, sizes, discount: float = 1.0) -> RelationalMDP:
    """The shipped domain with an initial-state sampler over ``sizes``."""
    return RelationalMDP(shipped_domain(GENERATORS[domain][0]) if domain in GENERATORS
                         else _unknown(domain), size_sampler(domain, sizes), discount, domain)


def _unknown(domain):
    raise ConfigError(f"unknown generator {domain!r}; known: {sorted(GENERATORS)}")
