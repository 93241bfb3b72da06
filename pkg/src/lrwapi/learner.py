"""Cost-sensitive decision-list learning from Q-labelled examples.

Rules are scored by ``Hvalue``: the number of examples a rule covers plus
the summed Q-advantage of every legal action it allows. Rules are grown by
beam search and assembled into a list by set covering.

The search evaluates literals in batch. Every candidate class expression
is interpreted on all training states at once as a boolean array over a
shared object axis, expressions with identical denotations on the data are
merged (the first in enumeration order is kept), and each literal becomes a
boolean mask over the (example, legal action) rows of one action type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .mdp import ResourceError
from .rollout import TrainingExample
from .taxonomy.enumerate import DEFAULT_CAP, canonical_relations, count_classes
from .taxonomy.semantics import _all_facts, allowed_actions, select_action
from .taxonomy.syntax import (A_THING, DecisionList, Inverse, Literal, MinRel,
                              Not, Primitive, PrimitiveRel, RelApply, Rule, Star,
                              Var)

# hvalues are compared after rounding so float summation order cannot split ties
HVALUE_DECIMALS = 9


def q_advantage(ex: TrainingExample, a) -> float:
    """``Q(s, a) - Q(s, prior)`` for one example.

    Raises:
        KeyError: if ``a`` or the prior action has no estimate in ``ex``.
    """
    if a not in ex.q_estimates:
        raise KeyError(f"{a} is not a legal action of this example")
    if ex.prior_action not in ex.q_estimates:
        raise KeyError(f"prior action {ex.prior_action} has no estimate")
    return ex.q_estimates[a] - ex.q_estimates[ex.prior_action]


@dataclass(frozen=True)
class ScoredRule:
    rule: Rule
    hvalue: float
    covered: int


def hvalue(rule: Rule, examples, coverage_weight: float = 1.0,
           advantage_weight: float = 1.0) -> ScoredRule:
    """Score a rule directly through the interpreter (reference path)."""
    total, covered = 0.0, 0
    for ex in examples:
        allowed = allowed_actions(rule, ex.state, list(ex.q_estimates))
        if allowed:
            covered += 1
            total += coverage_weight + advantage_weight * sum(
                q_advantage(ex, a) for a in allowed)
    return ScoredRule(rule, total, covered)


def covers(rule: Rule, ex: TrainingExample) -> bool:
    return bool(allowed_actions(rule, ex.state, list(ex.q_estimates)))


# -- batched interpretation ---------------------------------------------------------

def _matmul_any(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.matmul(a.astype(np.float32), b.astype(np.float32)) > 0.5


def _closure(r: np.ndarray, eye: np.ndarray) -> np.ndarray:
    x = r | eye
    while True:
        y = x | _matmul_any(x, x)
        if np.array_equal(x, y):
            return y
        x = y


def _with_var(e, j):
    """Replace the variable leaf of a unary chain with ``Var(j)``."""
    if isinstance(e, Var):
        return Var(j)
    if isinstance(e, Not):
        return Not(_with_var(e.inner, j))
    if isinstance(e, RelApply):
        return RelApply(e.rel, _with_var(e.inner, j))
    return e


class Denotations:
    """Class expressions interpreted on every training state at once.

    Attributes:
        objects: shared object axis (sorted union of all state objects).
        free: list of ``(expr, array[E, N])`` for variable-free classes.
        templates: list of ``(expr, array[E, N, N])`` for classes over one
            variable; ``expr`` uses ``Var(0)`` as placeholder and entry
            ``[e, v, o]`` says whether ``o`` is in the class when the
            variable is bound to ``v``.
        order: enumeration order as ``("free" | "tmpl", position)`` pairs.
    """

    def __init__(self, states, unary, binary, depth, arity, cap=DEFAULT_CAP):
        views = [_all_facts(s) for s in states]
        objs = sorted({o for s, (_, extra) in zip(states, views)
                       for o in list(s.objects) + extra})
        self.objects = objs
        idx = {o: i for i, o in enumerate(objs)}
        self.index = idx
        E, N = len(states), len(objs)
        present = np.zeros((E, N), bool)
        U, B = {}, {}
        for e, (s, (facts, extra)) in enumerate(zip(states, views)):
            for o in list(s.objects) + extra:
                present[e, idx[o]] = True
            for f in facts:
                if len(f) == 2 and f[0] in unary:
                    U.setdefault(f[0], np.zeros((E, N), bool))[e, idx[f[1]]] = True
                elif len(f) == 3 and f[0] in binary:
                    B.setdefault(f[0], np.zeros((E, N, N), bool))[e, idx[f[1]], idx[f[2]]] = True
        # predicates without any fact in the data denote empty sets everywhere
        self.unary = sorted(U)
        self.binary = sorted(B)
        self.present = present
        self.class_count = count_classes(depth, arity, len(self.unary), len(self.binary))
        if self.class_count * max(arity, 1) > cap:
            raise ResourceError(
                f"enumeration would produce {self.class_count * max(arity, 1)} "
                f"candidate literals (cap {cap})")
        eye = np.broadcast_to(np.eye(N, dtype=bool), (E, N, N)) & present[:, :, None]
        rels = []
        for r in canonical_relations(self.binary):
            base = B[_base_pred(r)]
            if isinstance(r, PrimitiveRel):
                m = base
            elif isinstance(r, Inverse):
                m = base.transpose(0, 2, 1)
            elif isinstance(r.inner, PrimitiveRel):
                m = _closure(base, eye)
            else:
                m = _closure(base.transpose(0, 2, 1), eye)
            rels.append((r, np.ascontiguousarray(m)))
        self._build(U, rels, eye, depth, arity > 0)

    def _build(self, U, rels, eye, depth, with_vars):
        present = self.present
        seen_free, seen_tmpl = set(), set()
        self.free, self.templates, self.order = [], [], []

        def add(kind, expr, arr, level):
            key = np.packbits(arr).tobytes()
            seen = seen_free if kind == "free" else seen_tmpl
            if key in seen:
                return
            seen.add(key)
            store = self.free if kind == "free" else self.templates
            self.order.append((kind, len(store)))
            store.append((expr, arr))
            level.append((kind, expr, arr))

        level: list = []
        for p in self.unary:
            add("free", Primitive(p), U[p], level)
        add("free", A_THING, present.copy(), level)
        if with_vars:
            add("tmpl", Var(0), eye.copy(), level)
        for r, m in rels:
            add("free", MinRel(r), m.any(axis=2) & ~m.any(axis=1), level)
        for _ in range(2, depth + 1):
            nxt: list = []
            for kind, expr, arr in level:
                if isinstance(expr, Not):
                    continue
                mask = present if kind == "free" else present[:, None, :]
                add(kind, Not(expr), mask & ~arr, nxt)
            for r, m in rels:
                for kind, expr, arr in level:
                    if kind == "free":
                        out = _matmul_any(arr[:, None, :], m)[:, 0, :]
                    else:
                        out = _matmul_any(arr, m)
                    add(kind, RelApply(r, expr), out, nxt)
            level = nxt


def _base_pred(r) -> str:
    while not isinstance(r, PrimitiveRel):
        r = r.inner
    return r.predicate


@dataclass
class _TypeTable:
    """Rows are the legal actions of one action type across all examples."""

    action: str
    arity: int
    row_example: np.ndarray     # (K,)
    row_actions: list           # GroundAction per row
    advantage: np.ndarray       # (K,)
    literals: list              # Literal per column of ``masks``
    masks: np.ndarray           # (K, L) bool, contiguous by row


def _type_tables(examples, arities, den: Denotations, index) -> list:
    tables = []
    for action in sorted(arities):
        k = arities[action]
        rows_e, rows_args, rows_a, adv = [], [], [], []
        for e, ex in enumerate(examples):
            base = ex.q_estimates[ex.prior_action]
            for a, q in ex.q_estimates.items():
                if a.name == action:
                    rows_e.append(e)
                    rows_args.append([index[o] for o in a.args])
                    rows_a.append(a)
                    adv.append(q - base)
        row_e = np.asarray(rows_e, dtype=np.int64)
        args = np.asarray(rows_args, dtype=np.int64).reshape(len(rows_e), k)
        cols, lits, seen = [], [], set()
        for i in range(k):
            for kind, pos in den.order:
                if kind == "free":
                    expr, arr = den.free[pos]
                    variants = [(expr, lambda arr=arr: arr[row_e, args[:, i]])]
                else:
                    expr, arr = den.templates[pos]
                    variants = [(_with_var(expr, j),
                                 lambda arr=arr, j=j: arr[row_e, args[:, j], args[:, i]])
                                for j in range(k)]
                for ex_expr, fn in variants:
                    col = fn()
                    key = np.packbits(col).tobytes()
                    if key in seen:
                        continue
                    seen.add(key)
                    cols.append(col)
                    lits.append(Literal(i, ex_expr))
        masks = (np.ascontiguousarray(np.stack(cols, axis=1)) if cols
                 else np.zeros((len(rows_e), 0), bool))
        tables.append(_TypeTable(action, k, row_e, rows_a,
                                 np.asarray(adv, dtype=np.float64), lits, masks))
    return tables


class _Search:
    """Beam search and set covering over precomputed literal masks."""

    # elements per temporary float block in ``extensions``
    BLOCK = 4_000_000

    def __init__(self, table: _TypeTable, n_examples, max_literals, beam_width,
                 coverage_weight, advantage_weight):
        self.t = table
        self.n_examples = n_examples
        self.l = max_literals
        self.b = beam_width
        self.cw = coverage_weight
        self.aw = advantage_weight

    def score(self, rows: np.ndarray):
        """(hvalue, covered) of the rule allowing exactly ``rows``."""
        if rows.size == 0:
            return 0.0, 0
        covered = np.unique(self.t.row_example[rows]).size
        return self.cw * covered + self.aw * float(self.t.advantage[rows].sum()), covered

    def extensions(self, rows: np.ndarray):
        """hvalue of adding each literal to a rule allowing ``rows``."""
        n_lits = self.t.masks.shape[1]
        if rows.size == 0 or n_lits == 0:
            return np.zeros(n_lits)
        sub = self.t.masks[rows]
        ex = self.t.row_example[rows]
        starts = np.flatnonzero(np.r_[True, ex[1:] != ex[:-1]])
        adv = self.t.advantage[rows]
        out = np.empty(n_lits)
        chunk = max(32, self.BLOCK // rows.size)
        for c0 in range(0, n_lits, chunk):
            block = sub[:, c0:c0 + chunk]
            cov = np.logical_or.reduceat(block, starts, axis=0).sum(axis=0)
            gain = adv.astype(np.float64) @ block.astype(np.float64)
            out[c0:c0 + chunk] = self.cw * cov + self.aw * gain
        return out

    def rows_of(self, lits, active_rows):
        rows = active_rows
        for j in lits:
            rows = rows[self.t.masks[rows, j]]
        return rows

    def beam_search(self, active_rows):
        """Returns ``(literal indices, hvalue)`` of the best rule found."""
        h0, _ = self.score(active_rows)
        beam = [((), h0, active_rows)]
        n_lits = self.t.masks.shape[1]
        for _ in range(10_000):
            hv = [np.round(h, HVALUE_DECIMALS) for _, h, _ in beam]
            cand_h = list(hv)
            cand_len = [len(r) for r, _, _ in beam]
            cand_src = [(m, -1) for m in range(len(beam))]
            for m, (lits, _, rows) in enumerate(beam):
                if len(lits) >= self.l or n_lits == 0:
                    continue
                ext = np.round(self.extensions(rows), HVALUE_DECIMALS)
                ext[list(lits)] = -np.inf
                cand_h.append(ext)
                cand_len.append(np.full(n_lits, len(lits) + 1))
                cand_src.append((m, None))
            new_beam = self._select(beam, cand_h, cand_len, cand_src, n_lits)
            if {r for r, _, _ in new_beam} == {r for r, _, _ in beam}:
                beam = new_beam
                break
            beam = new_beam
        best = beam[0]
        return best[0], best[1]

    def _select(self, beam, cand_h, cand_len, cand_src, n_lits):
        # flatten: beam members first, then extensions in (member, literal) order
        hs, lens, srcs = [], [], []
        for h, ln, src in zip(cand_h, cand_len, cand_src):
            if src[1] == -1:
                hs.append(np.array([h]))
                lens.append(np.array([ln]))
                srcs.append(np.array([[src[0], -1]]))
            else:
                hs.append(h)
                lens.append(ln)
                srcs.append(np.column_stack([np.full(n_lits, src[0]), np.arange(n_lits)]))
        H = np.concatenate(hs)
        LEN = np.concatenate(lens)
        SRC = np.concatenate(srcs)
        order = np.arange(H.size)
        valid = np.isfinite(H)
        H, LEN, SRC, order = H[valid], LEN[valid], SRC[valid], order[valid]
        perm = np.lexsort((order, LEN, -H))
        H, SRC = H[perm], SRC[perm]
        first = np.r_[True, H[1:] != H[:-1]]
        picks = np.flatnonzero(first)[: self.b]
        out = []
        for p in picks:
            m, j = SRC[p]
            lits, _, rows = beam[m]
            if j >= 0:
                lits = lits + (int(j),)
                rows = rows[self.t.masks[rows, j]]
            out.append((lits, float(H[p]), rows))
        return out

    def rule(self, lits) -> Rule:
        return Rule(self.t.action, tuple(self.t.literals[j] for j in lits), self.t.arity)


class DecisionListLearner(BaseEstimator):
    """Learn a decision-list policy from rollout training examples.

    Args:
        depth: maximum class-expression depth ``d``.
        max_literals: maximum literals per rule ``l``.
        beam_width: beam width ``b``.
        coverage_weight: weight of the covered-example count in Hvalue.
        advantage_weight: weight of the summed Q-advantage in Hvalue.
        max_candidates: cap on the number of candidate literals.
        max_rules: optional cap on the number of rules learned.
    """

    def __init__(self, depth=2, max_literals=3, beam_width=5, coverage_weight=1.0,
                 advantage_weight=1.0, max_candidates=DEFAULT_CAP, max_rules=None):
        self.depth = depth
        self.max_literals = max_literals
        self.beam_width = beam_width
        self.coverage_weight = coverage_weight
        self.advantage_weight = advantage_weight
        self.max_candidates = max_candidates
        self.max_rules = max_rules

    def _validate(self):
        for name in ("depth", "max_literals", "beam_width"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    def fit(self, X, y=None, domain=None):
        """Learn from a list of :class:`~lrwapi.rollout.TrainingExample`.

        Args:
            X: training examples (examples without legal actions are dropped).
            domain: the compiled domain, giving action types and vocabulary.
        """
        self._validate()
        if domain is None:
            raise ValueError("fit requires the domain")
        examples = [ex for ex in X if ex.q_estimates]
        for ex in examples:
            if ex.prior_action not in ex.q_estimates:
                raise KeyError(f"prior action {ex.prior_action} has no estimate")
        self.domain_ = domain
        self.n_examples_ = len(examples)
        self.scores_ = []
        if not examples:
            self.policy_ = DecisionList(())
            return self
        unary, binary = domain.unary_binary_vocabulary()
        arities = {s.name: s.arity for s in domain.schemas}
        den = Denotations([ex.state for ex in examples], set(unary), set(binary),
                          self.depth, max(arities.values(), default=0),
                          cap=self.max_candidates)
        tables = _type_tables(examples, arities, den, den.index)
        searches = [_Search(t, len(examples), self.max_literals, self.beam_width,
                            self.coverage_weight, self.advantage_weight) for t in tables]
        self.n_literals_ = {t.action: t.masks.shape[1] for t in tables}
        active = np.ones(len(examples), bool)
        rules = []
        while active.any():
            if self.max_rules is not None and len(rules) >= self.max_rules:
                break
            best = None
            for srch in searches:
                act_rows = np.flatnonzero(active[srch.t.row_example])
                lits, h = srch.beam_search(act_rows)
                if best is None or h > best[1]:
                    best = (srch, h, lits)
            srch, h, lits = best
            rows = srch.rows_of(lits, np.flatnonzero(active[srch.t.row_example]))
            covered = np.unique(srch.t.row_example[rows])
            if covered.size == 0:
                break
            rules.append(srch.rule(lits))
            self.scores_.append(ScoredRule(rules[-1], h, int(covered.size)))
            active[covered] = False
        self.policy_ = DecisionList(tuple(rules))
        return self

    def predict(self, X):
        """Action chosen by the learned list in each state (None if no legal)."""
        return [select_action(self.policy_, s, self.domain_) for s in X]

    def score(self, X, y=None):
        """Fraction of examples where the learned action has the best estimate."""
        X = [ex for ex in X if ex.q_estimates]
        if not X:
            return 1.0
        hits = 0
        for ex in X:
            a = select_action(self.policy_, ex.state, self.domain_)
            hits += ex.q_estimates.get(a, -np.inf) >= max(ex.q_estimates.values()) - 1e-12
        return hits / len(X)


def learn_decision_list(examples, domain, depth=2, max_literals=3, beam_width=5,
                        **kwargs) -> DecisionList:
    """Functional wrapper around :class:`DecisionListLearner`."""
    est = DecisionListLearner(depth=depth, max_literals=max_literals,
                              beam_width=beam_width, **kwargs)
    return est.fit(examples, domain=domain).policy_


def learn_rule(examples, domain, depth=2, max_literals=3, beam_width=5, **kwargs) -> ScoredRule:
    """The best rule over all action types (ties: least action type)."""
    est = DecisionListLearner(depth=depth, max_literals=max_literals,
                              beam_width=beam_width, max_rules=1, **kwargs)
    est.fit(examples, domain=domain)
    if est.scores_:
        return est.scores_[0]
    return _best_rule_without_cover(examples, domain, depth, max_literals, beam_width, **kwargs)


def beam_search(examples, domain, action, depth=2, max_literals=3, beam_width=5,
                coverage_weight=1.0, advantage_weight=1.0,
                max_candidates=DEFAULT_CAP) -> ScoredRule:
    """Beam search for the best rule of a single action type."""
    examples = [ex for ex in examples if ex.q_estimates]
    unary, binary = domain.unary_binary_vocabulary()
    arity = domain.schema_by_name[action].arity
    den = Denotations([ex.state for ex in examples], set(unary), set(binary),
                      depth, max(s.arity for s in domain.schemas), cap=max_candidates)
    (table,) = _type_tables(examples, {action: arity}, den, den.index)
    srch = _Search(table, len(examples), max_literals, beam_width,
                   coverage_weight, advantage_weight)
    rows = np.arange(table.row_example.size)
    lits, h = srch.beam_search(rows)
    covered = int(np.unique(table.row_example[srch.rows_of(lits, rows)]).size)
    return ScoredRule(srch.rule(lits), h, covered)


def _best_rule_without_cover(examples, domain, depth, max_literals, beam_width, **kwargs):
    best = None
    for s in domain.schemas:
        r = beam_search(examples, domain, s.name, depth, max_literals, beam_width, **kwargs)
        if best is None or r.hvalue > best.hvalue:
            best = r
    return best
