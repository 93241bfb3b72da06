"""Abstract syntax of class expressions, relation expressions and rules.

Variables are 0-based internally (``Var(0)`` is rendered ``X1``).
All nodes are frozen dataclasses and therefore hashable and shareable.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class RelExpr:
    """Base class for relation expressions."""

    __slots__ = ()


class ClassExpr:
    """Base class for class (concept) expressions."""

    __slots__ = ()


@dataclass(frozen=True)
class PrimitiveRel(RelExpr):
    predicate: str


@dataclass(frozen=True)
class Inverse(RelExpr):
    inner: RelExpr


@dataclass(frozen=True)
class Star(RelExpr):
    inner: RelExpr


@dataclass(frozen=True)
class Primitive(ClassExpr):
    predicate: str


@dataclass(frozen=True)
class Var(ClassExpr):
    index: int


@dataclass(frozen=True)
class AThing(ClassExpr):
    pass


@dataclass(frozen=True)
class Not(ClassExpr):
    inner: ClassExpr


@dataclass(frozen=True)
class RelApply(ClassExpr):
    rel: RelExpr
    inner: ClassExpr


@dataclass(frozen=True)
class MinRel(ClassExpr):
    rel: RelExpr


A_THING = AThing()


def depth(e: ClassExpr) -> int:
    """Leaves and ``(min R)`` have depth 1; ``not`` and ``(R C)`` add one."""
    d = 1
    while isinstance(e, (Not, RelApply)):
        d += 1
        e = e.inner
    return d


def variables(e: ClassExpr) -> set:
    """Indices of the variables occurring in ``e``."""
    while isinstance(e, (Not, RelApply)):
        e = e.inner
    return {e.index} if isinstance(e, Var) else set()


def predicates_of(e) -> set:
    """Predicate names mentioned by a class or relation expression."""
    if isinstance(e, (Primitive, PrimitiveRel)):
        return {e.predicate}
    if isinstance(e, (Inverse, Star)):
        return predicates_of(e.inner)
    if isinstance(e, Not):
        return predicates_of(e.inner)
    if isinstance(e, RelApply):
        return predicates_of(e.rel) | predicates_of(e.inner)
    if isinstance(e, MinRel):
        return predicates_of(e.rel)
    return set()


@dataclass(frozen=True)
class Literal:
    """The constraint ``x_var ∈ expr``."""

    var: int
    expr: ClassExpr


@dataclass(frozen=True)
class Rule:
    """Action-selection rule ``action(x1..xk) : literals``."""

    action: str
    literals: tuple = ()
    arity: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "literals", tuple(self.literals))
        if self.arity is not None:
            for lit in self.literals:
                used = {lit.var} | variables(lit.expr)
                if max(used) >= self.arity:
                    raise ValueError(
                        f"rule for {self.action!r} refers to X{max(used) + 1} "
                        f"but the action takes {self.arity} arguments")

    def extend(self, lit: Literal) -> "Rule":
        return Rule(self.action, self.literals + (lit,), self.arity)

    @property
    def max_depth(self) -> int:
        return max((depth(l.expr) for l in self.literals), default=0)

    def __len__(self):
        return len(self.literals)


@dataclass(frozen=True)
class DecisionList:
    rules: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __getitem__(self, i):
        return self.rules[i]
