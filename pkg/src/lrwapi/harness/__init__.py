"""Problem distributions, evaluation, policy-iteration drivers and exact DP."""

from .api import (LRWAPI, IterationRow, LRWConfig, LRWRun, api, api_step, lrw_api,
                  report_csv)
from .evaluation import EvalReport, evaluate_policy, run_episode
from .exact import (ExactSolution, TabularMDP, exact_solve, finite_horizon,
                    flatten_relational, random_tabular_mdp, value_iteration)
from .generators import (GENERATORS, GOAL_PREDICATES, ConfigError, GeneratorSpec,
                         generate_problem, generator_mdp, shipped_domain)
from .policies import DecisionListPolicy, RandomPolicy, TabularPolicy
from .randomwalk import RWConfig, random_walk, rw_sampler, sample_rw_problem

__all__ = [
    "LRWAPI", "IterationRow", "LRWConfig", "LRWRun", "api", "api_step", "lrw_api",
    "report_csv", "EvalReport", "evaluate_policy", "run_episode", "ExactSolution",
    "TabularMDP", "exact_solve", "finite_horizon", "flatten_relational",
    "random_tabular_mdp", "value_iteration", "GENERATORS", "GOAL_PREDICATES",
    "ConfigError", "GeneratorSpec", "generate_problem", "generator_mdp",
    "shipped_domain", "DecisionListPolicy", "RandomPolicy", "TabularPolicy",
    "RWConfig", "random_walk", "rw_sampler", "sample_rw_problem",
]
