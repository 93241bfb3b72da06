"""Command-line entry point: ``lrwapi <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

import numpy as np

from .harness.api import LRWAPI
from .harness.evaluation import evaluate_policy
from .harness.exact import exact_solve, flatten_relational
from .harness.generators import (GOAL_PREDICATES, ConfigError, generator_mdp,
                                 size_sampler)
from .harness.policies import DecisionListPolicy, RandomPolicy
from .harness.randomwalk import RWConfig, rw_sampler
from .mdp import DeclarationError, RelationalMDP, ResourceError
from .parsing import ParseError, load_domain, parse_domain, parse_policy, parse_problem
from .parsing.policy import render_policy
from .learner import DecisionListLearner
from .rollout import (RolloutConfig, flatten, improved_trajectories, read_training_set,
                      state_from_record, state_record, write_training_set)


class UsageError(ValueError):
    """Inconsistent command-line options."""


class _Parser(argparse.ArgumentParser):
    """Reports argument errors as JSON on stderr, like every other failure."""

    def error(self, message):
        sys.stderr.write(json.dumps({"error": "usage_error", "message": message,
                                     "usage": self.format_usage().strip()}) + "\n")
        sys.exit(2)


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _build_mdp(args, discount=1.0) -> RelationalMDP:
    """The MDP described by ``--domain``, ``--generator``/``--size`` and ``--init``."""
    domain_text = _read(args.domain) if args.domain else None
    if args.generator:
        sizes = args.size or [3]
        M = generator_mdp(args.generator, sizes, discount)
        if domain_text is not None:
            M = RelationalMDP(load_domain(domain_text), size_sampler(args.generator, sizes),
                              discount, args.generator)
        return M
    if domain_text is None or not args.init:
        raise UsageError("give --generator NAME, or --domain FILE with --init PROBLEM files")
    ast = parse_domain(domain_text)
    pool = [parse_problem(_read(p), ast).state for p in args.init]

    def sample(rng):
        return pool[rng.randrange(len(pool))]

    return RelationalMDP(load_domain(domain_text), sample, discount, ast.name)


def _goal_predicates(args) -> tuple:
    if args.goal_predicates:
        return tuple(args.goal_predicates)
    if args.generator in GOAL_PREDICATES:
        return GOAL_PREDICATES[args.generator]
    raise UsageError("--goal-predicates is required without a shipped --generator")


def _problem_source(spec: str, M, args):
    """``rw:N`` (random walks), ``generator`` (the initial sampler) or ``file:PATH``."""
    if spec.startswith("rw:"):
        try:
            n = int(spec[3:])
        except ValueError:
            raise UsageError(f"bad walk length in {spec!r}") from None
        return rw_sampler(M, RWConfig(n, _goal_predicates(args), args.noop_prob)), n
    if spec == "generator":
        return M.sample_initial, None
    if spec.startswith("file:"):
        lines = _read(spec[5:]).splitlines()
        return [state_from_record(json.loads(ln)) for ln in lines if ln.strip()], None
    raise UsageError(f"unknown problem source {spec!r}; use rw:N, generator or file:PATH")


def _load_policy(path, M):
    if path is None:
        return RandomPolicy(M)
    return DecisionListPolicy(parse_policy(_read(path), M.domain), M.domain)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- subcommands -------------------------------------------------------------------

def cmd_learn(args):
    M = _build_mdp(args)
    est = LRWAPI(max_walk=args.max_walk, goal_predicates=_goal_predicates(args),
                 tau=args.tau, delta=args.delta, sr_samples=args.sr_samples,
                 heldout_samples=args.heldout, n_trajectories=args.trajectories,
                 width=args.width, horizon=args.horizon,
                 trajectory_length=args.trajectory_length, depth=args.depth,
                 max_literals=args.length, beam_width=args.beam,
                 max_iterations=args.iterations, stop_patience=args.patience,
                 noop_prob=args.noop_prob, step_limit=args.step_limit,
                 initial_walk=args.initial_walk, random_state=args.seed)
    est.fit(M)
    _write(args.out, render_policy(est.decision_list_))
    if args.report:
        Path(args.report).write_text(est.report_csv())
    if args.summary:
        summary = est.summary()
        summary["argv"] = sys.argv[1:]
        Path(args.summary).write_text(json.dumps(summary, indent=2, default=str) + "\n")
    return 0


def cmd_evaluate(args):
    M = _build_mdp(args)
    policy = _load_policy(args.policy, M)
    source, n = _problem_source(args.problems, M, args)
    limit = args.step_limit or max(4 * (n or 0), 200)
    rep = evaluate_policy(policy, source, args.samples, limit, M, random.Random(args.seed))
    out = {"success_ratio": rep.success_ratio, "average_length": rep.average_length,
           "samples": rep.sample_count, "solved": rep.solved, "step_limit": rep.step_limit}
    print(json.dumps(out))
    return 0


def cmd_sample_problems(args):
    M = _build_mdp(args)
    source, _ = _problem_source(args.problems, M, args)
    rng = random.Random(args.seed)
    if callable(source):
        states = [source(random.Random(rng.getrandbits(64))) for _ in range(args.count)]
    else:
        states = source[:args.count]
    _write(args.out, "".join(json.dumps(state_record(s), sort_keys=True) + "\n"
                             for s in states))
    return 0


def cmd_rollout(args):
    M = _build_mdp(args)
    policy = _load_policy(args.policy, M)
    source, _ = _problem_source(args.problems, M, args)
    rng = random.Random(args.seed)
    if callable(source):
        starts = [source(random.Random(rng.getrandbits(64))) for _ in range(args.trajectories)]
    else:
        starts = [source[i % len(source)] for i in range(args.trajectories)]
    cfg = RolloutConfig(args.width, args.horizon, 1.0, args.select_delta)
    trajs = improved_trajectories(len(starts), cfg, M, policy, rng,
                                  length=args.trajectory_length, starts=starts)
    if args.out in (None, "-"):
        write_training_set(flatten(trajs), sys.stdout)
    else:
        with open(args.out, "w") as fh:
            write_training_set(flatten(trajs), fh)
    return 0


def cmd_learn_list(args):
    if args.domain:
        domain = load_domain(_read(args.domain))
    elif args.generator:
        domain = generator_mdp(args.generator, [1]).domain
    else:
        raise UsageError("give --domain FILE or --generator NAME")
    with open(args.data) as fh:
        examples = read_training_set(fh)
    est = DecisionListLearner(depth=args.depth, max_literals=args.length,
                              beam_width=args.beam).fit(examples, domain=domain)
    _write(args.out, render_policy(est.policy_))
    return 0


def cmd_solve_exact(args):
    M = _build_mdp(args, discount=args.discount)
    rng = random.Random(args.seed)
    starts = [M.sample_initial(random.Random(rng.getrandbits(64)))
              for _ in range(args.starts)]
    tab, states, actions = flatten_relational(M, starts, max_states=args.max_states,
                                              discount=args.discount)
    if args.policy:
        pol = _load_policy(args.policy, M)
        aidx = {a: i for i, a in enumerate(actions)}
        policy = np.array([0 if tab.terminal[i] else aidx.get(pol(s), 0)
                           for i, s in enumerate(states)])
    else:
        policy = None
    sol = exact_solve(tab, policy, args.discount, args.horizon, args.max_states)

    def col(x, i):
        return None if x is None else round(float(x[i]), 12)

    rows = []
    for i, s in enumerate(states):
        rows.append({
            "state": state_record(s), "terminal": bool(tab.terminal[i]),
            "policy_action": None if tab.terminal[i] else str(actions[sol.policy[i]]),
            "V": col(sol.V, i), "V_h": col(sol.V_h, i),
            "improved_action": (None if sol.improved is None or tab.terminal[i]
                                else str(actions[sol.improved[i]])),
        })
    out = {"states": len(states), "actions": len(actions), "discount": args.discount,
           "horizon": args.horizon, "r_max": sol.r_max, "v_max": sol.v_max,
           "delta_star": sol.delta_star, "table": rows}
    _write(args.out, json.dumps(out, indent=1) + "\n")
    return 0


# -- argument parsing ----------------------------------------------------------------

def _mdp_args(p):
    p.add_argument("--domain", help="domain file (PPDDL subset)")
    p.add_argument("--generator", help="shipped problem generator: blocks, gripper, clear-red")
    p.add_argument("--size", type=int, nargs="+", help="generator size(s), drawn uniformly")
    p.add_argument("--init", nargs="+", help="problem files used as initial states")
    p.add_argument("--goal-predicates", nargs="+", help="goal predicates for random walks")
    p.add_argument("--noop-prob", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrwapi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a decision-list policy from random walks")
    _mdp_args(p)
    p.add_argument("--trajectories", type=int, default=100)
    p.add_argument("--width", type=int, default=1)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--trajectory-length", type=int)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--length", type=int, default=3, help="max literals per rule")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.9)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--max-walk", type=int, default=10_000)
    p.add_argument("--initial-walk", type=int, default=1)
    p.add_argument("--sr-samples", type=int, default=100)
    p.add_argument("--heldout", type=int, default=100)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--step-limit", type=int)
    p.add_argument("--out", help="policy file (stdout by default)")
    p.add_argument("--report", help="per-iteration CSV report")
    p.add_argument("--summary", help="JSON run summary")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("evaluate", help="estimate SR and AL of a policy")
    _mdp_args(p)
    p.add_argument("--policy", help="policy file (random policy if omitted)")
    p.add_argument("--problems", default="generator", help="rw:N, generator or file:PATH")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--step-limit", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sample-problems", help="write problems as JSON lines")
    _mdp_args(p)
    p.add_argument("--problems", default="generator", help="rw:N or generator")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_problems)

    p = sub.add_parser("rollout", help="dump a training set of improved trajectories")
    _mdp_args(p)
    p.add_argument("--policy", help="base policy file (random policy if omitted)")
    p.add_argument("--problems", default="generator", help="rw:N, generator or file:PATH")
    p.add_argument("--trajectories", type=int, default=10)
    p.add_argument("--width", type=int, default=1)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--trajectory-length", type=int)
    p.add_argument("--select-delta", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("learn-list", help="learn a decision list from a training-set file")
    p.add_argument("--data", required=True, help="training set written by 'rollout'")
    p.add_argument("--domain", help="domain file (PPDDL subset)")
    p.add_argument("--generator", help="use the domain of a shipped generator")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--length", type=int, default=3, help="max literals per rule")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--out", help="policy file (stdout by default)")
    p.set_defaults(func=cmd_learn_list)

    p = sub.add_parser("solve-exact", help="value tables for small enumerable problems")
    _mdp_args(p)
    p.add_argument("--policy", help="policy file (optimal policy if omitted)")
    p.add_argument("--discount", type=float, default=0.9)
    p.add_argument("--horizon", type=int)
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--max-states", type=int, default=200_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_exact)
    return parser


ERRORS = {
    ParseError: "parse_error", DeclarationError: "declaration_error",
    ConfigError: "config_error", UsageError: "usage_error",
    ResourceError: "resource_error", ValueError: "value_error", KeyError: "format_error",
}


def _error(kind, exc):
    rec = {"error": kind, "message": str(exc)}
    span = getattr(exc, "span", None)
    if span is not None:
        rec["line"], rec["column"] = span.line, span.column
    sys.stderr.write(json.dumps(rec) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except tuple(ERRORS) as e:
        kind = next(v for k, v in ERRORS.items() if isinstance(e, k))
        _error(kind, e)
        return 2
    except OSError as e:
        _error("io_error", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
