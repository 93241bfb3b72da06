"""Depth-bounded enumeration of canonical class expressions and literals."""

from __future__ import annotations

from ..mdp import ResourceError
from .syntax import (A_THING, Inverse, Literal, MinRel, Not, Primitive,
                     PrimitiveRel, RelApply, Star, Var)

DEFAULT_CAP = 200_000


def canonical_relations(binary) -> list:
    """The four relation forms ``R, R^-1, R*, (R^-1)*`` for each predicate."""
    out = []
    for p in sorted(binary):
        r = PrimitiveRel(p)
        out += [r, Inverse(r), Star(r), Star(Inverse(r))]
    return out


def count_classes(d: int, arity: int, n_unary: int, n_binary: int) -> int:
    """Number of canonical class expressions of depth at most ``d``."""
    n_rel = 4 * n_binary
    plain = n_unary + 1 + arity + n_rel   # depth-1 expressions, none negated
    negated = 0
    total = plain
    for _ in range(2, d + 1):
        prev = plain + negated
        plain, negated = n_rel * prev, plain
        total += plain + negated
    return total


def enumerate_classes(d: int, arity: int, unary, binary, cap: int = DEFAULT_CAP) -> list:
    """Canonical class expressions of depth <= ``d``, shallow ones first.

    Double negation never appears; relations are restricted to
    :func:`canonical_relations`.

    Raises:
        ValueError: if ``d < 1``.
        ResourceError: if the count exceeds ``cap``.
    """
    if d < 1:
        raise ValueError("depth bound must be at least 1")
    count = count_classes(d, arity, len(set(unary)), len(set(binary)))
    if count > cap:
        raise ResourceError(
            f"enumeration would produce {count} class expressions (cap {cap})")
    rels = canonical_relations(binary)
    level = [Primitive(p) for p in sorted(set(unary))] + [A_THING]
    level += [Var(i) for i in range(arity)]
    level += [MinRel(r) for r in rels]
    out = list(level)
    for _ in range(2, d + 1):
        nxt = [Not(c) for c in level if not isinstance(c, Not)]
        nxt += [RelApply(r, c) for r in rels for c in level]
        out += nxt
        level = nxt
    return out


def enumerate_literals(d: int, arity: int, unary, binary, cap: int = DEFAULT_CAP) -> list:
    """One literal ``x_i ∈ C`` per argument position and canonical class.

    Raises:
        ResourceError: if the number of literals would exceed ``cap``.
    """
    count = arity * count_classes(d, arity, len(set(unary)), len(set(binary)))
    if count > cap:
        raise ResourceError(
            f"enumeration would produce {count} candidate literals (cap {cap})")
    classes = enumerate_classes(d, arity, unary, binary, cap=max(cap, 1))
    return [Literal(i, c) for i in range(arity) for c in classes]
