"""Relational MDPs compiled from STRIPS/PPDDL planning domains.

A state is one planning problem: a set of world facts plus a set of goal
facts. Goal facts use the world predicate name prefixed with ``g``; the
comparison view (prefix ``c``) is derived on demand and never stored.

Facts are plain tuples ``(predicate, arg1, ..., argk)``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, NamedTuple, Sequence

GOAL_PREFIX = "g"
COMPARISON_PREFIX = "c"
PROB_TOLERANCE = 1e-9

Fact = tuple


class DeclarationError(ValueError):
    """Raised for malformed predicate or schema declarations."""


class ResourceError(RuntimeError):
    """Raised when an enumeration would exceed a configured cap."""


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    arity: int
    kind: str = "world"  # world | goal | comparison

    def __str__(self):
        return f"{self.name}/{self.arity}"


def derive_goal_schema(world_predicates: Iterable[PredicateDecl]) -> list[PredicateDecl]:
    """Add the goal (``g``) and comparison (``c``) copy of every world predicate.

    Raises:
        DeclarationError: if a derived name collides with a world predicate.
    """
    world = list(world_predicates)
    names = {p.name for p in world}
    out = []
    for p in world:
        for prefix in (GOAL_PREFIX, COMPARISON_PREFIX):
            if prefix + p.name in names:
                raise DeclarationError(
                    f"predicate {prefix + p.name!r} clashes with the derived "
                    f"{'goal' if prefix == GOAL_PREFIX else 'comparison'} copy of {p.name!r}")
    for p in world:
        out.append(PredicateDecl(p.name, p.arity, "world"))
        out.append(PredicateDecl(GOAL_PREFIX + p.name, p.arity, "goal"))
        out.append(PredicateDecl(COMPARISON_PREFIX + p.name, p.arity, "comparison"))
    return out


class RelState:
    """An MDP state: world facts, goal facts and the problem's objects.

    Instances are immutable and hashable. Derived data (legal actions,
    interpretation views) is memoized in ``_cache``.
    """

    __slots__ = ("world", "goal", "objects", "_hash", "_cache")

    def __init__(self, world: Iterable[Fact], goal: Iterable[Fact] = (),
                 objects: Iterable[str] | None = None):
        self.world = frozenset(world)
        self.goal = frozenset(goal)
        if objects is None:
            objects = {a for f in self.world | self.goal for a in f[1:]}
        self.objects = tuple(sorted(set(objects)))
        self._hash = None
        self._cache = {}

    def with_world(self, world: frozenset) -> "RelState":
        s = RelState.__new__(RelState)
        s.world = world
        s.goal = self.goal
        s.objects = self.objects
        s._hash = None
        s._cache = {}
        return s

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, RelState):
            return NotImplemented
        return (self.world == other.world and self.goal == other.goal
                and self.objects == other.objects)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.world, self.goal, self.objects))
        return self._hash

    def __repr__(self):
        w = " ".join(format_fact(f) for f in sorted(self.world))
        g = " ".join(format_fact(f) for f in sorted(self.goal))
        return f"RelState(world=[{w}], goal=[{g}])"


def format_fact(fact: Fact) -> str:
    return "(" + " ".join(fact) + ")"


def parse_fact(text: str) -> Fact:
    return tuple(text.strip().strip("()").split())


def comparison_facts(s: RelState) -> frozenset:
    """Facts ``cp(o...)`` that hold where ``p(o...)`` and ``gp(o...)`` both hold."""
    out = set()
    for g in s.goal:
        w = (g[0][1:],) + g[1:]
        if w in s.world:
            out.add((COMPARISON_PREFIX + w[0],) + g[1:])
    return frozenset(out)


def is_goal_state(s: RelState) -> bool:
    world = s.world
    return all(((g[0][1:],) + g[1:]) in world for g in s.goal)


def world_to_goal(facts: Iterable[Fact]) -> frozenset:
    return frozenset((GOAL_PREFIX + f[0],) + f[1:] for f in facts)


class GroundAction(NamedTuple):
    """A schema applied to objects; tuple order gives the action ordering."""

    name: str
    args: tuple

    def __str__(self):
        return "(" + " ".join((self.name,) + tuple(self.args)) + ")"


def parse_action(text: str) -> GroundAction:
    parts = text.strip().strip("()").split()
    return GroundAction(parts[0], tuple(parts[1:]))


# A term inside a schema is either a parameter index (int) or a constant (str).
Term = int | str


@dataclass(frozen=True)
class Outcome:
    probability: float
    add: tuple = ()      # tuple of (pred, terms)
    delete: tuple = ()


@dataclass(frozen=True)
class ActionSchema:
    """A parameterized STRIPS action with probabilistic outcomes.

    Preconditions are ``(positive, predicate, terms)`` triples; the predicate
    ``"="`` denotes (in)equality between terms.
    """

    name: str
    params: tuple                    # parameter names, e.g. ("?x", "?y")
    param_types: tuple = ()
    precondition: tuple = ()
    outcomes: tuple = (Outcome(1.0),)
    cost: float = 1.0

    def __post_init__(self):
        total = sum(o.probability for o in self.outcomes)
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise DeclarationError(
                f"outcome probabilities of {self.name!r} sum to {total}, not 1")
        if any(o.probability < 0 for o in self.outcomes):
            raise DeclarationError(f"negative outcome probability in {self.name!r}")
        if self.cost < 0:
            raise DeclarationError(f"negative cost for {self.name!r}")

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def deterministic(self) -> bool:
        return len(self.outcomes) == 1


def _instantiate(templates, args):
    return [(pred,) + tuple(args[t] if isinstance(t, int) else t for t in terms)
            for pred, terms in templates]


def _index_facts(world) -> dict:
    index: dict = {}
    for f in world:
        index.setdefault(f[0], []).append(f[1:])
    return index


class Domain:
    """The static part of a relational MDP: predicates and action schemas.

    Args:
        name: domain name.
        predicates: world predicate declarations (types included as unary
            predicates).
        schemas: action schemas.
        constants: objects shared by every problem of the domain.
        static: names of predicates no schema ever changes.
    """

    def __init__(self, name: str, predicates: Sequence[PredicateDecl],
                 schemas: Sequence[ActionSchema], constants: Sequence[str] = (),
                 types: dict | None = None):
        self.name = name
        self.predicates = {p.name: p for p in predicates}
        self.schemas = tuple(sorted(schemas, key=lambda s: s.name))
        self.schema_by_name = {s.name: s for s in self.schemas}
        self.constants = tuple(constants)
        self.types = dict(types or {})
        self.all_predicates = derive_goal_schema(self.predicates.values())
        for s in self.schemas:
            for o in s.outcomes:
                for pred, terms in o.add + o.delete:
                    if pred not in self.predicates:
                        raise DeclarationError(
                            f"schema {s.name!r} changes undeclared predicate {pred!r}")
        changed = {pred for s in self.schemas for o in s.outcomes
                   for pred, _ in o.add + o.delete}
        self.static = frozenset(self.predicates) - changed
        self._plans = {s.name: _grounding_plan(s) for s in self.schemas}

    def __repr__(self):
        return f"Domain({self.name!r}, schemas={[s.name for s in self.schemas]})"

    def action_types(self) -> list[tuple[str, int]]:
        return [(s.name, s.arity) for s in self.schemas]

    def unary_binary_vocabulary(self):
        """Unary and binary predicate names usable by the policy language."""
        unary = sorted(p.name for p in self.all_predicates if p.arity == 1)
        binary = [p.name for p in self.all_predicates if p.arity == 2]
        # wider predicates appear to the policy language as projections
        binary += [f"{p.name}_arg{i}" for p in self.all_predicates if p.arity >= 3
                   for i in range(1, p.arity + 1)]
        return unary, sorted(binary)

    # -- legality -----------------------------------------------------------

    def legal_actions(self, s: RelState) -> list[GroundAction]:
        key = ("legal", id(self))
        cached = s._cache.get(key)
        if cached is not None:
            return cached
        index = _index_facts(s.world)
        out = []
        for schema in self.schemas:
            out.extend(GroundAction(schema.name, args)
                       for args in self._ground(schema, index, s.objects))
        out.sort()
        s._cache[key] = out
        return out

    def _ground(self, schema: ActionSchema, index: dict, objects):
        positives, negatives, equalities = self._plans[schema.name]
        k = schema.arity
        binding: list = [None] * k
        found = set()

        def finish():
            free = [j for j in range(k) if binding[j] is None]
            for combo in product(objects, repeat=len(free)):
                for j, o in zip(free, combo):
                    binding[j] = o
                args = tuple(binding)
                if self._check_rest(args, negatives, equalities, index):
                    found.add(args)
            for j in free:
                binding[j] = None

        def rec(i):
            if i == len(positives):
                finish()
                return
            pred, terms = positives[i]
            for fargs in index.get(pred, ()):
                if len(fargs) != len(terms):
                    continue
                newly = []
                ok = True
                for t, a in zip(terms, fargs):
                    if isinstance(t, int):
                        b = binding[t]
                        if b is None:
                            binding[t] = a
                            newly.append(t)
                        elif b != a:
                            ok = False
                            break
                    elif t != a:
                        ok = False
                        break
                if ok:
                    rec(i + 1)
                for t in newly:
                    binding[t] = None

        rec(0)
        return found

    @staticmethod
    def _check_rest(args, negatives, equalities, index):
        for positive, a, b in equalities:
            x = args[a] if isinstance(a, int) else a
            y = args[b] if isinstance(b, int) else b
            if (x == y) != positive:
                return False
        for pred, terms in negatives:
            fargs = tuple(args[t] if isinstance(t, int) else t for t in terms)
            if fargs in index.get(pred, ()):
                return False
        return True

    def is_legal(self, s: RelState, a: GroundAction) -> bool:
        schema = self.schema_by_name.get(a.name)
        if schema is None or len(a.args) != schema.arity:
            return False
        world = s.world
        for t, o in zip(schema.param_types, a.args):
            if t and t != "object" and (t, o) not in world:
                return False
        for positive, pred, terms in schema.precondition:
            vals = tuple(a.args[t] if isinstance(t, int) else t for t in terms)
            if pred == "=":
                holds = vals[0] == vals[1]
            else:
                holds = (pred,) + vals in world
            if holds != positive:
                return False
        return True

    # -- transitions --------------------------------------------------------

    def cost(self, a: GroundAction) -> float:
        return self.schema_by_name[a.name].cost

    def successor_world(self, world: frozenset, a: GroundAction,
                        rng: random.Random) -> frozenset:
        """Apply ``a`` to a world (no legality or goal checks)."""
        schema = self.schema_by_name[a.name]
        outcomes = schema.outcomes
        if len(outcomes) == 1:
            outcome = outcomes[0]
        else:
            u = rng.random()
            acc = 0.0
            outcome = outcomes[-1]
            for o in outcomes:
                acc += o.probability
                if u < acc:
                    outcome = o
                    break
        delete = _instantiate(outcome.delete, a.args)
        add = _instantiate(outcome.add, a.args)
        return (world.difference(delete)).union(add)

    def outcome_distribution(self, s: RelState, a: GroundAction):
        """Exact ``[(probability, next_state)]`` for ``step(s, a)``."""
        if is_goal_state(s) or not self.is_legal(s, a):
            return [(1.0, s)]
        schema = self.schema_by_name[a.name]
        out = []
        for o in schema.outcomes:
            if o.probability == 0:
                continue
            w = s.world.difference(_instantiate(o.delete, a.args)).union(
                _instantiate(o.add, a.args))
            out.append((o.probability, s.with_world(w)))
        return out

    def step(self, s: RelState, a: GroundAction, rng: random.Random):
        """Simulate ``a`` in ``s``; goal states absorb with zero reward and
        illegal actions are no-ops that still pay their cost."""
        if is_goal_state(s):
            return s, 0.0
        cost = self.schema_by_name[a.name].cost
        if not self.is_legal(s, a):
            return s, -cost
        return s.with_world(self.successor_world(s.world, a, rng)), -cost

    def all_ground_actions(self, objects: Sequence[str]) -> list[GroundAction]:
        """Every grounding of every schema over ``objects``, in action order."""
        out = [GroundAction(s.name, args) for s in self.schemas
               for args in product(sorted(objects), repeat=s.arity)]
        out.sort()
        return out


def _grounding_plan(schema: ActionSchema):
    positives, type_lits, negatives, equalities = [], [], [], []
    for positive, pred, terms in schema.precondition:
        if pred == "=":
            equalities.append((positive, terms[0], terms[1]))
        elif positive:
            positives.append((pred, tuple(terms)))
        else:
            negatives.append((pred, tuple(terms)))
    for j, t in enumerate(schema.param_types):
        if t and t != "object":
            type_lits.append((t, (j,)))
    return positives + type_lits, negatives, equalities


def legal_actions(domain: Domain, s: RelState) -> list[GroundAction]:
    return domain.legal_actions(s)


def step(domain: Domain, s: RelState, a: GroundAction, rng: random.Random):
    return domain.step(s, a, rng)


@dataclass
class RelationalMDP:
    """A domain plus an initial-problem sampler and a discount factor.

    Implements the simulator protocol used by rollout and evaluation:
    ``legal_actions``, ``step``, ``is_terminal``, ``sample_initial``.
    """

    domain: Domain
    initial_sampler: Callable[[random.Random], RelState] | None = None
    discount: float = 1.0
    name: str = field(default="")

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must lie in [0, 1], got {self.discount}")

    @property
    def deterministic(self) -> bool:
        return all(s.deterministic for s in self.domain.schemas)

    def legal_actions(self, s: RelState) -> list[GroundAction]:
        return self.domain.legal_actions(s)

    def step(self, s: RelState, a: GroundAction, rng: random.Random):
        return self.domain.step(s, a, rng)

    def is_terminal(self, s: RelState) -> bool:
        return is_goal_state(s)

    def sample_initial(self, rng: random.Random) -> RelState:
        if self.initial_sampler is None:
            raise ValueError("this MDP has no initial-state sampler")
        return self.initial_sampler(rng)

    def with_initial(self, sampler) -> "RelationalMDP":
        return RelationalMDP(self.domain, sampler, self.discount, self.name)


# -- binarization -------------------------------------------------------------

def _tuple_object(fact: Fact) -> str:
    return "<" + " ".join(fact) + ">"


@dataclass(frozen=True)
class Binarization:
    """Mapping between k-ary facts (k >= 3) and binary projection facts.

    Every k-ary fact ``p(o1..ok)`` becomes a tuple object ``t`` with facts
    ``p_arg1(t, o1) .. p_argk(t, ok)``.
    """

    predicates: tuple
    schemas: tuple
    wide: dict  # predicate name -> arity, for arity >= 3

    def binarize_facts(self, facts: Iterable[Fact]):
        out, extra = set(), set()
        for f in facts:
            if f[0] in self.wide:
                t = _tuple_object(f)
                extra.add(t)
                for i, o in enumerate(f[1:], 1):
                    out.add((f"{f[0]}_arg{i}", t, o))
            else:
                out.add(f)
        return out, extra

    def binarize_state(self, s: RelState) -> RelState:
        world, wo = self.binarize_facts(s.world)
        goal, go = self.binarize_facts(s.goal)
        return RelState(world, goal, set(s.objects) | wo | go)

    def reconstruct_facts(self, facts: Iterable[Fact]) -> set:
        out, parts = set(), {}
        for f in facts:
            head = f[0]
            base, sep, idx = head.rpartition("_arg")
            if sep and base in self.wide and idx.isdigit():
                parts.setdefault((base, f[1]), {})[int(idx)] = f[2]
            else:
                out.add(f)
        for (base, _t), args in parts.items():
            k = self.wide[base]
            out.add((base,) + tuple(args[i] for i in range(1, k + 1)))
        return out

    def reconstruct_state(self, s: RelState) -> RelState:
        tuple_objs = {o for o in s.objects if o.startswith("<")}
        return RelState(self.reconstruct_facts(s.world), self.reconstruct_facts(s.goal),
                        [o for o in s.objects if o not in tuple_objs])


def binarize_predicates(schemas: Sequence[ActionSchema],
                        predicates: Sequence[PredicateDecl],
                        max_arity: int = 4) -> Binarization:
    """Replace predicates of arity >= 3 with binary projection predicates.

    Schemas keep acting on the k-ary form; the returned :class:`Binarization`
    converts states for the policy language and back.

    Raises:
        DeclarationError: for an arity above ``max_arity``.
    """
    preds, wide = [], {}
    for p in predicates:
        if p.arity > max_arity:
            raise DeclarationError(
                f"predicate {p.name!r} has arity {p.arity} > supported {max_arity}")
        if p.arity >= 3:
            wide[p.name] = p.arity
            preds.extend(PredicateDecl(f"{p.name}_arg{i}", 2, p.kind)
                         for i in range(1, p.arity + 1))
        else:
            preds.append(p)
    return Binarization(tuple(preds), tuple(schemas), wide)
