"""Tokenizer and reader for s-expressions with source spans."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


class ParseError(ValueError):
    """A syntax or resolution error pointing into the input text."""

    def __init__(self, message: str, span: Span | None = None, expected: str | None = None):
        self.message = message
        self.span = span
        self.expected = expected
        text = message
        if span is not None:
            text = f"{span}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


@dataclass(frozen=True)
class Atom:
    value: str
    span: Span

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SList:
    items: tuple
    span: Span

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)

    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Atom):
            return self.items[0].value
        return None


def tokenize(text: str):
    """Yield ``(token, span)`` pairs; ``;`` starts a comment."""
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c in "()":
            yield c, Span(line, col)
            i += 1
            col += 1
            continue
        start, scol = i, col
        while i < n and not text[i].isspace() and text[i] not in "();":
            i += 1
            col += 1
        yield text[start:i], Span(line, scol)


def read(text: str) -> list:
    """Read every top-level s-expression in ``text``; identifiers are lower-cased."""
    stack: list = [[]]
    spans: list = []
    last = Span(1, 1)
    for tok, span in tokenize(text):
        last = span
        if tok == "(":
            stack.append([])
            spans.append(span)
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", span)
            items = stack.pop()
            stack[-1].append(SList(tuple(items), spans.pop()))
        else:
            stack[-1].append(Atom(tok.lower(), span))
    if len(stack) > 1:
        raise ParseError("unbalanced '(': missing ')'", spans[-1] if spans else last,
                         expected="')'")
    return stack[0]
