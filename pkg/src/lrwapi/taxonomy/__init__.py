"""The taxonomic policy language: syntax, interpretation and enumeration."""

from .enumerate import (DEFAULT_CAP, canonical_relations, count_classes,
                        enumerate_classes, enumerate_literals)
from .semantics import (EvaluationError, StateView, allowed_actions,
                        decision_rule_index, interpret_class, interpret_rel,
                        rule_allows, select_action)
from .syntax import (A_THING, AThing, ClassExpr, DecisionList, Inverse, Literal,
                     MinRel, Not, Primitive, PrimitiveRel, RelApply, RelExpr,
                     Rule, Star, Var, depth, predicates_of, variables)

__all__ = [
    "A_THING", "AThing", "ClassExpr", "DecisionList", "Inverse", "Literal",
    "MinRel", "Not", "Primitive", "PrimitiveRel", "RelApply", "RelExpr", "Rule",
    "Star", "Var", "depth", "predicates_of", "variables",
    "EvaluationError", "StateView", "allowed_actions", "decision_rule_index",
    "interpret_class", "interpret_rel", "rule_allows", "select_action",
    "DEFAULT_CAP", "canonical_relations", "count_classes", "enumerate_classes",
    "enumerate_literals",
]
