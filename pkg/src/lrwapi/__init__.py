"""Learning decision-list policies for relational planning domains.

Approximate policy iteration with rollout-based improvement, a taxonomic
policy language, and random-walk bootstrapping of the training problems.
"""

from .harness import LRWAPI, LRWConfig, lrw_api
from .learner import DecisionListLearner, learn_decision_list
from .mdp import Domain, GroundAction, RelState, RelationalMDP
from .parsing import load_domain, parse_policy, render_policy
from .rollout import RolloutConfig, improved_trajectories, policy_rollout

__version__ = "0.1.0"

__all__ = [
    "LRWAPI", "LRWConfig", "lrw_api", "DecisionListLearner", "learn_decision_list",
    "Domain", "GroundAction", "RelState", "RelationalMDP", "load_domain",
    "parse_policy", "render_policy", "RolloutConfig", "improved_trajectories",
    "policy_rollout",
]
