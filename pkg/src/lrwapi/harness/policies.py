"""Policies as callables ``policy(state, rng) -> action or None``."""

from __future__ import annotations

import random

from ..taxonomy.semantics import select_action
from ..taxonomy.syntax import DecisionList


class RandomPolicy:
    """Uniformly random legal action."""

    deterministic = False

    def __init__(self, simulator):
        self.simulator = simulator

    def __call__(self, s, rng: random.Random):
        legal = self.simulator.legal_actions(s)
        if not legal:
            return None
        return legal[rng.randrange(len(legal))]

    def __repr__(self):
        return "RandomPolicy()"


class DecisionListPolicy:
    """The deterministic policy defined by a decision list."""

    deterministic = True

    def __init__(self, decision_list: DecisionList, domain):
        self.decision_list = decision_list
        self.domain = domain

    def __call__(self, s, rng=None):
        return select_action(self.decision_list, s, self.domain)

    def __repr__(self):
        return f"DecisionListPolicy({len(self.decision_list)} rules)"


class TabularPolicy:
    """A fixed action per state for enumerable MDPs."""

    deterministic = True

    def __init__(self, actions):
        self.actions = list(actions)

    def __call__(self, s, rng=None):
        return self.actions[s]

    def __repr__(self):
        return f"TabularPolicy({self.actions})"
