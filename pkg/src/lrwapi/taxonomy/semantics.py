"""Set-theoretic interpretation of the policy language over one state.

Object sets are Python ints used as bitmasks over the state's sorted object
tuple. A relation is a tuple ``succ`` where ``succ[i]`` is the mask of objects
``j`` with ``(o_i, o_j)`` in the relation.
"""

from __future__ import annotations

from ..mdp import COMPARISON_PREFIX, GroundAction, RelState, comparison_facts
from .syntax import (AThing, ClassExpr, DecisionList, Inverse, MinRel, Not,
                     Primitive, PrimitiveRel, RelApply, RelExpr, Rule, Star, Var)


class EvaluationError(RuntimeError):
    """Raised when an expression cannot be evaluated (e.g. unbound variable)."""


def _all_facts(s: RelState):
    facts = set(s.world) | set(s.goal) | set(comparison_facts(s))
    wide = [f for f in facts if len(f) > 3]
    extra = []
    for f in wide:
        # arity >= 3: represent through a tuple object and projection relations
        t = "<" + " ".join(f) + ">"
        extra.append(t)
        facts.discard(f)
        facts.update((f"{f[0]}_arg{i}", t, o) for i, o in enumerate(f[1:], 1))
    return facts, extra


class StateView:
    """Indexed view of a state used by the interpreter.

    Built once per state and cached on it; holds the memo table for
    variable-free expressions.
    """

    def __init__(self, s: RelState):
        facts, extra = _all_facts(s)
        self.objects = tuple(sorted(set(s.objects) | set(extra)))
        self.index = {o: i for i, o in enumerate(self.objects)}
        n = len(self.objects)
        self.universe = (1 << n) - 1
        self.unary: dict = {}
        binary: dict = {}
        for f in facts:
            if len(f) == 2:
                i = self.index.get(f[1])
                if i is not None:
                    self.unary[f[0]] = self.unary.get(f[0], 0) | (1 << i)
            elif len(f) == 3:
                i, j = self.index.get(f[1]), self.index.get(f[2])
                if i is None or j is None:
                    continue
                succ = binary.get(f[0])
                if succ is None:
                    succ = binary[f[0]] = [0] * n
                succ[i] |= 1 << j
        self.binary = {p: tuple(v) for p, v in binary.items()}
        self._empty_rel = (0,) * n
        self.rel_memo: dict = {}
        self.class_memo: dict = {}

    @classmethod
    def of(cls, s: RelState) -> "StateView":
        v = s._cache.get("view")
        if v is None:
            v = s._cache["view"] = cls(s)
        return v

    def mask_to_set(self, mask: int) -> set:
        out = set()
        i = 0
        while mask:
            if mask & 1:
                out.add(self.objects[i])
            mask >>= 1
            i += 1
        return out

    # -- relations ------------------------------------------------------------

    def rel(self, r: RelExpr) -> tuple:
        got = self.rel_memo.get(r)
        if got is not None:
            return got
        if isinstance(r, PrimitiveRel):
            out = self.binary.get(r.predicate, self._empty_rel)
        elif isinstance(r, Inverse):
            inner = self.rel(r.inner)
            inv = [0] * len(inner)
            for i, m in enumerate(inner):
                j = 0
                while m:
                    if m & 1:
                        inv[j] |= 1 << i
                    m >>= 1
                    j += 1
            out = tuple(inv)
        elif isinstance(r, Star):
            out = _closure(self.rel(r.inner))
        else:
            raise EvaluationError(f"not a relation expression: {r!r}")
        self.rel_memo[r] = out
        return out

    # -- classes ----------------------------------------------------------------

    def image(self, succ: tuple, mask: int) -> int:
        out = 0
        i = 0
        while mask:
            if mask & 1:
                out |= succ[i]
            mask >>= 1
            i += 1
        return out

    def cls(self, e: ClassExpr, binding=None) -> int:
        """Mask of ``e``; ``binding`` maps variable index to an object name."""
        if isinstance(e, Var):
            if binding is None or e.index >= len(binding):
                raise EvaluationError(f"variable X{e.index + 1} is unbound")
            i = self.index.get(binding[e.index])
            if i is None:
                raise EvaluationError(f"object {binding[e.index]!r} not in state")
            return 1 << i
        key = e
        got = self.class_memo.get(key)
        if got is not None:
            return got
        has_var = False
        if isinstance(e, Primitive):
            out = self.unary.get(e.predicate, 0)
        elif isinstance(e, AThing):
            out = self.universe
        elif isinstance(e, Not):
            out = self.universe & ~self.cls(e.inner, binding)
            has_var = _mentions_var(e)
        elif isinstance(e, RelApply):
            out = self.image(self.rel(e.rel), self.cls(e.inner, binding))
            has_var = _mentions_var(e)
        elif isinstance(e, MinRel):
            succ = self.rel(e.rel)
            has_out = 0
            has_in = 0
            for i, m in enumerate(succ):
                if m:
                    has_out |= 1 << i
                has_in |= m
            out = has_out & ~has_in
        else:
            raise EvaluationError(f"not a class expression: {e!r}")
        if not has_var:
            self.class_memo[key] = out
        return out


def _mentions_var(e) -> bool:
    while isinstance(e, (Not, RelApply)):
        e = e.inner
    return isinstance(e, Var)


def _closure(succ: tuple) -> tuple:
    """Reflexive-transitive closure of a successor-mask relation."""
    n = len(succ)
    out = []
    for i in range(n):
        reach = 1 << i
        frontier = reach
        while frontier:
            nxt = 0
            m = frontier
            j = 0
            while m:
                if m & 1:
                    nxt |= succ[j]
                m >>= 1
                j += 1
            frontier = nxt & ~reach
            reach |= nxt
        out.append(reach)
    return tuple(out)


def interpret_rel(r: RelExpr, s: RelState) -> set:
    """The set of object pairs denoted by ``r`` in ``s``."""
    v = StateView.of(s)
    succ = v.rel(r)
    return {(v.objects[i], o) for i, m in enumerate(succ) for o in v.mask_to_set(m)}


def interpret_class(e: ClassExpr, s: RelState, binding=None) -> set:
    """The set of objects denoted by ``e`` in ``s`` under ``binding``.

    Raises:
        EvaluationError: if ``e`` mentions a variable not bound by ``binding``.
    """
    v = StateView.of(s)
    return v.mask_to_set(v.cls(e, tuple(binding) if binding is not None else None))


def rule_allows(rule: Rule, s: RelState, a: GroundAction) -> bool:
    """True iff every literal of ``rule`` holds for the arguments of ``a``."""
    if a.name != rule.action:
        return False
    v = StateView.of(s)
    args = a.args
    for lit in rule.literals:
        if lit.var >= len(args):
            raise EvaluationError(f"X{lit.var + 1} exceeds the arity of {a.name!r}")
        i = v.index.get(args[lit.var])
        if i is None or not (v.cls(lit.expr, args) >> i) & 1:
            return False
    return True


def allowed_actions(rule: Rule, s: RelState, legal) -> list:
    """Legal actions allowed by ``rule``, in action order."""
    return [a for a in legal if a.name == rule.action and rule_allows(rule, s, a)]


def select_action(policy: DecisionList, s: RelState, domain):
    """Action chosen by a decision list in ``s``.

    The first rule allowing some legal action fires and the least such action
    is returned; if no rule fires, the least legal action; ``None`` when there
    are no legal actions.
    """
    legal = domain.legal_actions(s)
    if not legal:
        return None
    for rule in policy.rules:
        for a in legal:
            if a.name == rule.action and rule_allows(rule, s, a):
                return a
    return legal[0]


def decision_rule_index(policy: DecisionList, s: RelState, domain):
    """Index of the rule that fires in ``s`` (``None`` on fallthrough)."""
    legal = domain.legal_actions(s)
    for k, rule in enumerate(policy.rules):
        if any(a.name == rule.action and rule_allows(rule, s, a) for a in legal):
            return k
    return None
