"""PPDDL subset: ``:strips :typing :equality :probabilistic-effects``.

Preconditions are conjunctions of (possibly negated) atoms and equalities.
Effects are conjunctions of add/delete atoms, optionally containing
``(probabilistic p1 E1 p2 E2 ...)`` blocks one level deep. Types compile to
unary static predicates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from ..mdp import (ActionSchema, Domain, Outcome, PredicateDecl, RelState,
                   world_to_goal)
from .sexpr import Atom, ParseError, SList, Span, read

SUPPORTED_REQUIREMENTS = {
    ":strips", ":typing", ":equality", ":probabilistic-effects",
    ":negative-preconditions",
}
PROB_SUM_TOLERANCE = 1e-6


@dataclass
class LiteralAst:
    predicate: str
    args: tuple
    positive: bool
    span: Span


@dataclass
class EffectAst:
    add: list = field(default_factory=list)
    delete: list = field(default_factory=list)
    # each block: list of (probability, EffectAst)
    probabilistic: list = field(default_factory=list)


@dataclass
class ActionAst:
    name: str
    parameters: list          # [(var, type)]
    precondition: list        # [LiteralAst]
    effect: EffectAst
    span: Span


@dataclass
class PredicateAst:
    name: str
    parameters: list
    span: Span


@dataclass
class DomainAst:
    name: str
    requirements: list
    types: dict               # type -> parent type
    constants: list           # [(name, type)]
    predicates: list          # [PredicateAst]
    actions: list             # [ActionAst]
    span: Span

    def predicate(self, name):
        for p in self.predicates:
            if p.name == name:
                return p
        return None


@dataclass
class ProblemAst:
    name: str
    domain: str
    objects: list             # [(name, type)]
    init: list               # [LiteralAst]
    goal: list                # [LiteralAst]
    span: Span


@dataclass
class Problem:
    """A parsed problem: initial MDP state plus objects in declared order."""

    name: str
    state: RelState
    objects: list
    ast: ProblemAst


def _expect_list(x, what):
    if not isinstance(x, SList):
        raise ParseError(f"expected {what}", x.span, expected="'('")
    return x


def _expect_atom(x, what):
    if not isinstance(x, Atom):
        raise ParseError(f"expected {what}", x.span)
    return x.value


def _typed_list(items):
    """Parse ``a b - t c - u d`` into [(a, t), (b, t), (c, u), (d, object)]."""
    out, pending = [], []
    it = list(items)
    i = 0
    while i < len(it):
        tok = it[i]
        name = _expect_atom(tok, "a name")
        if name == "-":
            if i + 1 >= len(it):
                raise ParseError("missing type after '-'", tok.span)
            typ = _expect_atom(it[i + 1], "a type name")
            out.extend((p, typ) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(name)
        i += 1
    out.extend((p, "object") for p in pending)
    return out


def _parse_define(text, kind):
    exprs = read(text)
    if not exprs:
        raise ParseError("empty document", Span(1, 1), expected="'(define'")
    if len(exprs) > 1:
        raise ParseError("trailing content after definition", exprs[1].span)
    top = exprs[0]
    top = _expect_list(top, "'(define ...)'")
    if top.head() != "define":
        raise ParseError("expected 'define'", top.span, expected="define")
    if len(top) < 2:
        raise ParseError("missing header", top.span)
    header = _expect_list(top[1], f"'({kind} NAME)'")
    if header.head() != kind or len(header) != 2:
        raise ParseError(f"expected '({kind} NAME)'", header.span)
    return top, _expect_atom(header[1], "a name")


def _total(fn):
    # any malformed input must surface as ParseError, never as a crash
    def wrapper(text, *args, **kwargs):
        try:
            return fn(text, *args, **kwargs)
        except ParseError:
            raise
        except (IndexError, KeyError, TypeError, AttributeError, ValueError) as exc:
            raise ParseError(f"malformed input ({exc.__class__.__name__}: {exc})",
                             Span(1, 1)) from exc
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_total
def parse_domain(text: str) -> DomainAst:
    """Parse a domain definition.

    Raises:
        ParseError: for syntax errors, unknown keywords, undeclared
            predicates/types, or probabilistic blocks not summing to 1.
    """
    top, name = _parse_define(text, "domain")
    reqs, types, constants, predicates, actions = [], {}, [], [], []
    for sec in top.items[2:]:
        sec = _expect_list(sec, "a domain section")
        key = sec.head()
        if key == ":requirements":
            for r in sec.items[1:]:
                rv = _expect_atom(r, "a requirement")
                if rv not in SUPPORTED_REQUIREMENTS:
                    raise ParseError(f"unsupported requirement {rv!r}", r.span)
                reqs.append(rv)
        elif key == ":types":
            for t, parent in _typed_list(sec.items[1:]):
                types[t] = parent
        elif key == ":constants":
            constants.extend(_typed_list(sec.items[1:]))
        elif key == ":predicates":
            for p in sec.items[1:]:
                p = _expect_list(p, "a predicate declaration")
                pname = _expect_atom(p[0], "a predicate name")
                predicates.append(PredicateAst(pname, _typed_list(p.items[1:]), p.span))
        elif key == ":action":
            actions.append(_parse_action(sec))
        else:
            raise ParseError(f"unknown domain keyword {key!r}", sec.span,
                             expected=":requirements, :types, :constants, :predicates or :action")
    ast = DomainAst(name, reqs, types, constants, predicates, actions, top.span)
    _check_domain(ast)
    return ast


def _parse_action(sec: SList) -> ActionAst:
    if len(sec) < 2:
        raise ParseError("missing action name", sec.span)
    name = _expect_atom(sec[1], "an action name")
    params, pre, eff = [], [], EffectAst()
    i = 2
    while i < len(sec):
        key = _expect_atom(sec[i], "an action keyword")
        if i + 1 >= len(sec):
            raise ParseError(f"missing value for {key}", sec[i].span)
        val = sec[i + 1]
        if key == ":parameters":
            params = _typed_list(_expect_list(val, "a parameter list").items)
        elif key == ":precondition":
            pre = _parse_condition(val)
        elif key == ":effect":
            eff = _parse_effect(val, allow_prob=True)
        else:
            raise ParseError(f"unknown action keyword {key!r}", sec[i].span,
                             expected=":parameters, :precondition or :effect")
        i += 2
    return ActionAst(name, params, pre, eff, sec.span)


def _parse_atom(x, positive=True) -> LiteralAst:
    x = _expect_list(x, "an atom")
    if not x.items:
        raise ParseError("empty atom", x.span)
    pred = _expect_atom(x[0], "a predicate name")
    args = tuple(_expect_atom(a, "a term") for a in x.items[1:])
    return LiteralAst(pred, args, positive, x.span)


def _parse_literal(x) -> LiteralAst:
    x = _expect_list(x, "a literal")
    if x.head() == "not":
        if len(x) != 2:
            raise ParseError("'not' takes one argument", x.span)
        return _parse_atom(x[1], positive=False)
    return _parse_atom(x)


def _parse_condition(x) -> list:
    x = _expect_list(x, "a condition")
    if not x.items:
        return []
    if x.head() == "and":
        return [_parse_literal(c) for c in x.items[1:]]
    if x.head() in ("or", "imply", "exists", "forall", "when"):
        raise ParseError(f"unsupported connective {x.head()!r}", x.span)
    return [_parse_literal(x)]


def _parse_prob(atom) -> float:
    v = _expect_atom(atom, "a probability")
    try:
        p = float(Fraction(v))
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad probability {v!r}", atom.span, expected="a number") from None
    if not 0.0 <= p <= 1.0:
        raise ParseError(f"probability {v} outside [0, 1]", atom.span)
    return p


def _parse_effect(x, allow_prob) -> EffectAst:
    x = _expect_list(x, "an effect")
    eff = EffectAst()
    parts = x.items[1:] if x.head() == "and" else ([x] if x.items else [])
    for part in parts:
        part = _expect_list(part, "an effect")
        head = part.head()
        if head == "probabilistic":
            if not allow_prob:
                raise ParseError("nested 'probabilistic' is not supported", part.span)
            items = part.items[1:]
            if len(items) % 2 or not items:
                raise ParseError("'probabilistic' needs probability/effect pairs", part.span)
            block, total = [], 0.0
            for j in range(0, len(items), 2):
                p = _parse_prob(items[j])
                block.append((p, _parse_effect(items[j + 1], allow_prob=False)))
                total += p
            if abs(total - 1.0) > PROB_SUM_TOLERANCE:
                raise ParseError(f"probabilities sum to {total:g}, not 1", part.span)
            eff.probabilistic.append(block)
        elif head == "not":
            if len(part) != 2:
                raise ParseError("'not' takes one argument", part.span)
            eff.delete.append(_parse_atom(part[1], positive=False))
        elif head in ("when", "forall", "increase", "decrease"):
            raise ParseError(f"unsupported effect {head!r}", part.span)
        else:
            eff.add.append(_parse_atom(part))
    return eff


def _check_domain(ast: DomainAst):
    declared = {p.name: len(p.parameters) for p in ast.predicates}
    known_types = set(ast.types) | set(ast.types.values()) | {"object"}
    for p in ast.predicates:
        for _, t in p.parameters:
            if t not in known_types:
                raise ParseError(f"undeclared type {t!r}", p.span)
    for a in ast.actions:
        params = {v for v, _ in a.parameters}
        for _, t in a.parameters:
            if t not in known_types:
                raise ParseError(f"undeclared type {t!r}", a.span)
        lits = list(a.precondition) + _effect_literals(a.effect)
        consts = {c for c, _ in ast.constants}
        for lit in lits:
            if lit.predicate == "=":
                if len(lit.args) != 2:
                    raise ParseError("'=' takes two terms", lit.span)
            elif lit.predicate not in declared and lit.predicate not in known_types:
                raise ParseError(f"undeclared predicate {lit.predicate!r}", lit.span)
            elif lit.predicate in declared and declared[lit.predicate] != len(lit.args):
                raise ParseError(
                    f"{lit.predicate!r} expects {declared[lit.predicate]} arguments, "
                    f"got {len(lit.args)}", lit.span)
            for t in lit.args:
                if t.startswith("?") and t not in params:
                    raise ParseError(f"unbound variable {t!r}", lit.span)
                if not t.startswith("?") and t not in consts:
                    raise ParseError(f"unknown constant {t!r}", lit.span)


def _effect_literals(eff: EffectAst) -> list:
    out = list(eff.add) + list(eff.delete)
    for block in eff.probabilistic:
        for _, sub in block:
            out.extend(_effect_literals(sub))
    return out


def _ancestors(t, types):
    seen = []
    while t and t != "object" and t not in seen:
        seen.append(t)
        t = types.get(t, "object")
    return seen


def compile_domain(ast: DomainAst) -> Domain:
    """Lower a domain AST to a :class:`~lrwapi.mdp.Domain`."""
    preds = [PredicateDecl(p.name, len(p.parameters)) for p in ast.predicates]
    declared = {p.name for p in preds}
    for t in sorted((set(ast.types) | set(ast.types.values())) - {"object"}):
        if t not in declared:
            preds.append(PredicateDecl(t, 1))
    schemas = []
    for a in ast.actions:
        index = {v: i for i, (v, _) in enumerate(a.parameters)}

        def term(t):
            return index[t] if t.startswith("?") else t

        pre = tuple((lit.positive, lit.predicate, tuple(term(t) for t in lit.args))
                    for lit in a.precondition)
        outcomes = []
        blocks = [[(1.0, EffectAst())]] + a.effect.probabilistic
        for combo in product(*blocks):
            p = 1.0
            add = [(l.predicate, tuple(term(t) for t in l.args)) for l in a.effect.add]
            dele = [(l.predicate, tuple(term(t) for t in l.args)) for l in a.effect.delete]
            for prob, sub in combo:
                p *= prob
                add += [(l.predicate, tuple(term(t) for t in l.args)) for l in sub.add]
                dele += [(l.predicate, tuple(term(t) for t in l.args)) for l in sub.delete]
            outcomes.append(Outcome(p, tuple(add), tuple(dele)))
        total = sum(o.probability for o in outcomes)
        # float products of exact decimal inputs can miss 1 by a few ulps
        outcomes = tuple(Outcome(o.probability / total, o.add, o.delete) for o in outcomes)
        schemas.append(ActionSchema(
            name=a.name,
            params=tuple(v for v, _ in a.parameters),
            param_types=tuple(t for _, t in a.parameters),
            precondition=pre,
            outcomes=outcomes,
        ))
    return Domain(ast.name, preds, schemas,
                  constants=[c for c, _ in ast.constants], types=ast.types)


def load_domain(text: str) -> Domain:
    return compile_domain(parse_domain(text))


@_total
def parse_problem(text: str, domain: DomainAst) -> Problem:
    """Parse a problem against ``domain``.

    Init atoms become world facts (plus one unary fact per object type and
    supertype); each goal atom ``p(o..)`` becomes the goal fact ``gp(o..)``.

    Raises:
        ParseError: for unknown objects/predicates or non-positive goals.
    """
    top, name = _parse_define(text, "problem")
    dom_name, objects, init, goal = None, [], [], []
    for sec in top.items[2:]:
        sec = _expect_list(sec, "a problem section")
        key = sec.head()
        if key == ":domain":
            dom_name = _expect_atom(sec[1], "a domain name")
        elif key == ":objects":
            objects.extend(_typed_list(sec.items[1:]))
        elif key == ":init":
            init.extend(_parse_atom(x) for x in sec.items[1:])
        elif key == ":goal":
            goal = _parse_condition(sec[1]) if len(sec) > 1 else []
        elif key == ":requirements":
            continue
        else:
            raise ParseError(f"unknown problem keyword {key!r}", sec.span,
                             expected=":domain, :objects, :init or :goal")
    if dom_name is not None and dom_name != domain.name:
        raise ParseError(f"problem is for domain {dom_name!r}, not {domain.name!r}", top.span)
    ast = ProblemAst(name, dom_name or domain.name, objects, init, goal, top.span)

    all_objects = list(domain.constants) + objects
    obj_names = [o for o, _ in all_objects]
    obj_set = set(obj_names)
    arity = {p.name: len(p.parameters) for p in domain.predicates}
    type_names = (set(domain.types) | set(domain.types.values())) - {"object"}
    for t in type_names:
        arity.setdefault(t, 1)

    def check(lit):
        if lit.predicate not in arity:
            raise ParseError(f"unknown predicate {lit.predicate!r}", lit.span)
        if arity[lit.predicate] != len(lit.args):
            raise ParseError(f"{lit.predicate!r} expects {arity[lit.predicate]} arguments",
                             lit.span)
        for a in lit.args:
            if a not in obj_set:
                raise ParseError(f"unknown object {a!r}", lit.span)

    world = set()
    for lit in init:
        check(lit)
        world.add((lit.predicate,) + lit.args)
    for o, t in all_objects:
        if t != "object" and t not in type_names:
            raise ParseError(f"undeclared type {t!r} for object {o!r}", top.span)
        for anc in _ancestors(t, domain.types):
            world.add((anc, o))
    goals = []
    for lit in goal:
        if not lit.positive or lit.predicate == "=":
            raise ParseError("goals must be positive ground atoms", lit.span)
        check(lit)
        goals.append((lit.predicate,) + lit.args)
    state = RelState(world, world_to_goal(goals), obj_names)
    return Problem(name, state, obj_names, ast)
