"""Reading and writing decision-list policies in text form.

One rule per line::

    putdown: (X1 ∈ holding)
    pickup: (X1 ∈ clear) ∧ (X1 ∈ (on* (on red)))

ASCII fallbacks: ``in`` for ∈, ``&`` for ∧, ``^-1`` for ⁻¹, ``^*`` for ``*``
and ``^-*`` for ⁻* (the star of the inverse). A leading rule number
(``3.``) is ignored, the ∈ and ∧ connectives may be omitted, and
``universal`` is accepted for ``a-thing``. Blank lines and lines starting
with ``#`` are skipped.
"""

from __future__ import annotations

import re

from ..taxonomy.syntax import (A_THING, AThing, DecisionList, Inverse, Literal,
                               MinRel, Not, Primitive, PrimitiveRel, RelApply,
                               Rule, Star, Var)
from .sexpr import ParseError, Span

_SUFFIXES = {
    "⁻¹": ("inv",), "^-1": ("inv",), "^{-1}": ("inv",),
    "*": ("star",), "^*": ("star",), "^{*}": ("star",),
    "⁻*": ("inv", "star"), "^-*": ("inv", "star"), "^{-*}": ("inv", "star"),
}
_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<lp>\()
  | (?P<rp>\))
  | (?P<colon>:)
  | (?P<member>∈)
  | (?P<conj>∧|&|/\\|,)
  | (?P<suffix>⁻¹|⁻\*|\^\{-1\}|\^\{\*\}|\^\{-\*\}|\^-1|\^-\*|\^\*|\*)
  | (?P<ident>[A-Za-z0-9_][A-Za-z0-9_\-]*)
""", re.VERBOSE)
_VAR = re.compile(r"x_?(\d+)$")
_NUMBER = re.compile(r"\s*\d+\.\s")
_THING_NAMES = {"a-thing", "universal"}


class _Tok:
    __slots__ = ("kind", "text", "span", "suffixes")

    def __init__(self, kind, text, span):
        self.kind, self.text, self.span = kind, text, span
        self.suffixes = []

    def __repr__(self):
        return f"{self.kind}:{self.text}"


def _tokenize(line: str, lineno: int, col0: int = 0) -> list:
    out = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        span = Span(lineno, col0 + pos + 1)
        if m is None:
            raise ParseError(f"unexpected character {line[pos]!r}", span)
        kind = m.lastgroup
        text = m.group(kind)
        pos = m.end()
        if kind == "ws":
            continue
        if kind == "suffix":
            if not out or out[-1].kind != "ident":
                raise ParseError(f"relation operator {text!r} must follow a predicate", span)
            out[-1].suffixes.extend(_SUFFIXES[text])
            continue
        if kind == "ident":
            text = text.lower()
        out.append(_Tok(kind, text, span))
    return out


class _Vocab:
    def __init__(self, domain):
        self.domain = domain
        if domain is not None:
            unary, binary = domain.unary_binary_vocabulary()
            self.unary, self.binary = set(unary), set(binary)
        else:
            self.unary = self.binary = None

    def check_unary(self, name, span):
        if self.unary is not None and name not in self.unary:
            hint = " (it is a relation)" if name in self.binary else ""
            raise ParseError(f"unknown class predicate {name!r}{hint}", span)

    def check_binary(self, name, span):
        if self.binary is not None and name not in self.binary:
            hint = " (it is a class)" if name in self.unary else ""
            raise ParseError(f"unknown relation predicate {name!r}{hint}", span)

    def arity(self, action, span):
        if self.domain is None:
            return None
        schema = self.domain.schema_by_name.get(action)
        if schema is None:
            raise ParseError(f"unknown action type {action!r}", span)
        return schema.arity


class _LineParser:
    def __init__(self, toks, vocab, end_span):
        self.toks = toks
        self.i = 0
        self.vocab = vocab
        self.end_span = end_span
        self.arity = None

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self, kind=None, what=None):
        t = self.peek()
        if t is None:
            raise ParseError(f"unexpected end of rule", self.end_span, expected=what or kind)
        if kind is not None and t.kind != kind:
            raise ParseError(f"unexpected {t.text!r}", t.span, expected=what or kind)
        self.i += 1
        return t

    @staticmethod
    def _is(tok, kind, word):
        """``tok`` is the connective ``kind``, symbolic or spelled as ``word``."""
        if tok is None:
            return False
        return tok.kind == kind or (tok.kind == "ident" and tok.text == word
                                    and not tok.suffixes)

    def var_index(self, tok):
        m = _VAR.match(tok.text)
        if not m or tok.suffixes:
            return None
        idx = int(m.group(1)) - 1
        if idx < 0:
            raise ParseError("variables are numbered from X1", tok.span)
        if self.arity is not None and idx >= self.arity:
            raise ParseError(f"X{idx + 1} exceeds the arity {self.arity} of the action",
                             tok.span)
        return idx

    def rule(self):
        name = self.next("ident", "an action name")
        if name.suffixes:
            raise ParseError("unexpected relation operator after action name", name.span)
        self.next("colon", "':'")
        self.arity = self.vocab.arity(name.text, name.span)
        lits = []
        while self.peek() is not None:
            if lits and self._is(self.peek(), "conj", "and"):
                self.next()
            lits.append(self.literal())
        if self.peek() is not None:
            raise ParseError(f"unexpected {self.peek().text!r}", self.peek().span)
        return Rule(name.text, tuple(lits), self.arity)

    def literal(self):
        self.next("lp", "'(' starting a literal")
        vt = self.next("ident", "a variable X1, X2, ...")
        idx = self.var_index(vt)
        if idx is None:
            raise ParseError(f"expected a variable, got {vt.text!r}", vt.span,
                             expected="X1, X2, ...")
        # the word "in" is the connective unless it is the whole expression
        after = self.peek(1)
        if self._is(self.peek(), "member", "in") and not (after is None or after.kind == "rp"):
            self.next()
        expr = self.expr()
        self.next("rp", "')' closing the literal")
        return Literal(idx, expr)

    def relation(self, tok):
        self.vocab.check_binary(tok.text, tok.span)
        r = PrimitiveRel(tok.text)
        for op in tok.suffixes:
            r = Inverse(r) if op == "inv" else Star(r)
        return r

    def atom(self, tok):
        if tok.suffixes:
            raise ParseError(f"relation {tok.text!r} used as a class", tok.span)
        idx = self.var_index(tok)
        if idx is not None:
            return Var(idx)
        if tok.text in _THING_NAMES:
            return A_THING
        self.vocab.check_unary(tok.text, tok.span)
        return Primitive(tok.text)

    def expr(self):
        t = self.next(what="a class expression")
        if t.kind == "ident":
            return self.atom(t)
        if t.kind != "lp":
            raise ParseError(f"unexpected {t.text!r}", t.span, expected="a class expression")
        head = self.peek()
        if head is None:
            raise ParseError("unexpected end of rule", self.end_span, expected="')'")
        if head.kind == "lp":
            inner = self.expr()
        else:
            h = self.next("ident", "a class expression")
            after = self.peek()
            if after is not None and after.kind == "rp":
                inner = self.atom(h)
            elif h.text == "not" and not h.suffixes:
                inner = Not(self.expr())
            elif h.text == "min" and not h.suffixes:
                r = self.next("ident", "a relation")
                inner = MinRel(self.relation(r))
            else:
                inner = RelApply(self.relation(h), self.expr())
        self.next("rp", "')'")
        return inner


def parse_rule(line: str, domain=None, lineno: int = 1) -> Rule:
    col0 = 0
    m = _NUMBER.match(line)
    if m:
        col0 = m.end()
        line = line[m.end():]
    toks = _tokenize(line, lineno, col0)
    end = Span(lineno, col0 + len(line) + 1)
    return _LineParser(toks, _Vocab(domain), end).rule()


def parse_policy(text: str, domain=None) -> DecisionList:
    """Parse a decision list, one rule per line.

    Args:
        text: policy text.
        domain: optional compiled :class:`~lrwapi.mdp.Domain`; when given,
            action names, predicate names and variable indices are checked.

    Raises:
        ParseError: on malformed text or unresolvable names, with a span.
    """
    rules = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        rules.append(parse_rule(line, domain, lineno))
    return DecisionList(tuple(rules))


# -- rendering -----------------------------------------------------------------

def render_rel(r, ascii: bool = False) -> str:
    inv, star, invstar = ("^-1", "^*", "^-*") if ascii else ("⁻¹", "*", "⁻*")
    if isinstance(r, PrimitiveRel):
        return r.predicate
    if isinstance(r, Star) and isinstance(r.inner, Inverse):
        return render_rel(r.inner.inner, ascii) + invstar
    if isinstance(r, Inverse):
        return render_rel(r.inner, ascii) + inv
    if isinstance(r, Star):
        return render_rel(r.inner, ascii) + star
    raise TypeError(f"not a relation expression: {r!r}")


def render_class(e, ascii: bool = False) -> str:
    if isinstance(e, Primitive):
        return e.predicate
    if isinstance(e, Var):
        return f"X{e.index + 1}"
    if isinstance(e, AThing):
        return "a-thing"
    if isinstance(e, Not):
        return f"(not {render_class(e.inner, ascii)})"
    if isinstance(e, RelApply):
        return f"({render_rel(e.rel, ascii)} {render_class(e.inner, ascii)})"
    if isinstance(e, MinRel):
        return f"(min {render_rel(e.rel, ascii)})"
    raise TypeError(f"not a class expression: {e!r}")


def render_rule(rule: Rule, ascii: bool = False) -> str:
    member, conj = (" in ", " & ") if ascii else (" ∈ ", " ∧ ")
    lits = conj.join(f"(X{l.var + 1}{member}{render_class(l.expr, ascii)})"
                     for l in rule.literals)
    return f"{rule.action}: {lits}" if lits else f"{rule.action}:"


def render_policy(policy: DecisionList, ascii: bool = False) -> str:
    return "".join(render_rule(r, ascii) + "\n" for r in policy.rules)
