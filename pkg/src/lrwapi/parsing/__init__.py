"""Parsers for domain/problem files and for decision-list policy text."""

from .domain import (DomainAst, Problem, ProblemAst, compile_domain, load_domain,
                     parse_domain, parse_problem)
from .policy import (parse_policy, parse_rule, render_class, render_policy,
                     render_rel, render_rule)
from .sexpr import ParseError, Span

__all__ = [
    "DomainAst", "Problem", "ProblemAst", "compile_domain", "load_domain",
    "parse_domain", "parse_problem", "parse_policy", "parse_rule",
    "render_class", "render_policy", "render_rel", "render_rule",
    "ParseError", "Span",
]
