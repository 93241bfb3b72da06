import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrwapi.mdp import (ActionSchema, DeclarationError, Domain, GroundAction, Outcome,
                        PredicateDecl, RelState, binarize_predicates, comparison_facts,
                        derive_goal_schema, is_goal_state, world_to_goal)
from lrwapi.harness.generators import blocks_problem, clear_red_problem, gripper_problem
from lrwapi.parsing import load_domain
from oracles import naive_legal_actions


def test_derive_goal_schema_adds_goal_and_comparison_copies():
    out = derive_goal_schema([PredicateDecl("clear", 1)])
    assert [(p.name, p.arity, p.kind) for p in out] == [
        ("clear", 1, "world"), ("gclear", 1, "goal"), ("cclear", 1, "comparison")]
    out = derive_goal_schema([PredicateDecl("on", 2)])
    assert {p.name for p in out} == {"on", "gon", "con"}
    assert all(p.arity == 2 for p in out)
    assert derive_goal_schema([]) == []


def test_derive_goal_schema_size_and_collision():
    preds = [PredicateDecl("on", 2), PredicateDecl("clear", 1), PredicateDecl("red", 1)]
    assert len(derive_goal_schema(preds)) == 3 * len(preds)
    with pytest.raises(DeclarationError, match="gon"):
        derive_goal_schema([PredicateDecl("on", 2), PredicateDecl("gon", 2)])


def test_comparison_facts():
    s = RelState({("on", "a", "b")}, {("gon", "a", "b")}, ["a", "b"])
    assert comparison_facts(s) == {("con", "a", "b")}
    assert comparison_facts(RelState({("on", "a", "b")}, (), ["a", "b"])) == frozenset()


def test_comparison_facts_match_pairwise_conjunction():
    world = {("on", "a", "b"), ("on", "b", "c"), ("on-table", "c"), ("clear", "a")}
    goal = world_to_goal({("on", "a", "b"), ("on", "c", "b"), ("clear", "a"),
                          ("on-table", "b")})
    s = RelState(world, goal, ["a", "b", "c"])
    expected = {("c" + w[0],) + w[1:] for w in world for g in goal
                if g == ("g" + w[0],) + w[1:]}
    assert comparison_facts(s) == expected == {("con", "a", "b"), ("cclear", "a")}


def test_goal_state():
    w = {("on-table", "a"), ("on", "a", "b"), ("clear", "b")}
    assert is_goal_state(RelState(w, {("gclear", "b")}, ["a", "b"]))
    assert not is_goal_state(RelState(w - {("clear", "b")}, {("gclear", "b")}, ["a", "b"]))
    assert is_goal_state(RelState(set(), set(), ["a"]))


def test_comparison_facts_are_not_stored():
    s = RelState({("clear", "a")}, {("gclear", "a")}, ["a"])
    assert not any(f[0].startswith("c") and f[0] != "clear" for f in s.world | s.goal)


def test_legal_actions_exclude_pickups_while_holding(blocks):
    s = RelState({("holding", "a"), ("clear", "b"), ("on-table", "b")}, (), ["a", "b"])
    legal = blocks.legal_actions(s)
    assert not any(a.name in ("pickup", "unstack") for a in legal)
    assert [(a.name, a.args) for a in legal] == naive_legal_actions(blocks, s)


def test_legal_actions_empty_and_ordered(blocks):
    assert blocks.legal_actions(RelState(set(), (), ["a", "b"])) == []
    s = RelState({("handempty",), ("clear", "a"), ("clear", "b"), ("on-table", "a"),
                  ("on-table", "b")}, (), ["b", "a"])
    legal = blocks.legal_actions(s)
    assert legal == sorted(legal)
    assert legal.index(GroundAction("pickup", ("a",))) < legal.index(GroundAction("pickup", ("b",)))


@pytest.mark.parametrize("seed", range(25))
def test_legal_actions_match_naive_enumeration(seed, blocks, gripper, clear_red):
    rng = random.Random(seed)
    for dom, s in [(blocks, blocks_problem(4, rng)), (gripper, gripper_problem(2)),
                   (clear_red, clear_red_problem(4, rng))]:
        for _ in range(15):
            legal = dom.legal_actions(s)
            assert [(a.name, a.args) for a in legal] == naive_legal_actions(dom, s)
            if not legal:
                break
            s = s.with_world(dom.successor_world(s.world, rng.choice(legal), rng))


def test_step_goal_illegal_and_normal(blocks, rng):
    goal_state = RelState({("clear", "a"), ("on-table", "a"), ("handempty",)},
                          {("gclear", "a")}, ["a"])
    a = GroundAction("pickup", ("a",))
    assert blocks.step(goal_state, a, rng) == (goal_state, 0.0)
    s = RelState({("clear", "a"), ("on-table", "a")}, {("gholding", "a")}, ["a"])
    assert blocks.step(s, a, rng) == (s, -1.0)        # no handempty: no-op
    s2 = s.with_world(s.world | {("handempty",)})
    nxt, r = blocks.step(s2, a, rng)
    assert r == -1.0 and nxt.world == {("holding", "a")} and nxt.goal == s2.goal


COIN = """
(define (domain coin)
  (:requirements :strips :probabilistic-effects)
  (:predicates (ready) (heads) (tails))
  (:action flip :parameters () :precondition (ready)
    :effect (and (not (ready)) (probabilistic 0.5 (heads) 0.5 (tails)))))
"""


def test_two_outcome_frequency_and_chi_square():
    from scipy.stats import chisquare
    dom = load_domain(COIN)
    s = RelState({("ready",)}, {("gheads",)}, [])
    rng = random.Random(7)
    heads = sum(("heads",) in dom.step(s, GroundAction("flip", ()), rng)[0].world
                for _ in range(10_000))
    assert abs(heads / 10_000 - 0.5) <= 0.02
    assert chisquare([heads, 10_000 - heads]).pvalue > 0.001


def test_goal_facts_immutable_and_absorbing(gripper):
    rng = random.Random(3)
    s = gripper_problem(2)
    goal = s.goal
    reached = False
    for _ in range(400):
        legal = gripper.legal_actions(s)
        a = rng.choice(legal) if legal else GroundAction("move", ("rooma", "roomb"))
        was_goal = is_goal_state(s)
        s, r = gripper.step(s, a, rng)
        assert s.goal == goal
        assert r <= 0
        assert (r == 0) == was_goal
        if was_goal:
            reached = True
            assert is_goal_state(s)
    assert reached


def test_step_sequences_are_reproducible(blocks):
    def run(seed):
        rng = random.Random(seed)
        s = blocks_problem(5, rng)
        out = []
        for _ in range(30):
            legal = blocks.legal_actions(s)
            a = legal[rng.randrange(len(legal))]
            s, r = blocks.step(s, a, rng)
            out.append((a, r, s))
        return out
    assert run(11) == run(11)


def test_schema_probabilities_must_sum_to_one():
    with pytest.raises(DeclarationError):
        ActionSchema("bad", (), outcomes=(Outcome(0.5), Outcome(0.4)))
    assert not ActionSchema("coin", (), outcomes=(Outcome(0.5), Outcome(0.5))).deterministic


def test_custom_cost():
    dom = Domain("d", [PredicateDecl("p", 0)],
                 [ActionSchema("slow", (), precondition=(), cost=3.0)])
    s = RelState(set(), {("gp",)}, [])
    assert dom.step(s, GroundAction("slow", ()), random.Random(0))[1] == -3.0


# -- binarization -------------------------------------------------------------------

def _ternary():
    preds = [PredicateDecl("between", 3), PredicateDecl("on", 2), PredicateDecl("clear", 1)]
    schema = ActionSchema("go", ("?a", "?b", "?c"),
                          precondition=((True, "between", (0, 1, 2)),),
                          outcomes=(Outcome(1.0, add=(("clear", (0,)),)),))
    return preds, [schema]


def test_binarize_ternary_fact():
    preds, schemas = _ternary()
    binz = binarize_predicates(schemas, preds)
    assert max(p.arity for p in binz.predicates) <= 2
    facts, extra = binz.binarize_facts({("between", "a", "b", "c")})
    (t,) = extra
    assert facts == {("between_arg1", t, "a"), ("between_arg2", t, "b"),
                     ("between_arg3", t, "c")}
    assert binz.reconstruct_facts(facts) == {("between", "a", "b", "c")}
    assert binz.binarize_facts({("on", "a", "b")})[0] == {("on", "a", "b")}


objs = st.sampled_from(["a", "b", "c", "d"])


@settings(max_examples=60, deadline=None)
@given(st.sets(st.tuples(objs, objs, objs), max_size=6),
       st.sets(st.tuples(objs, objs), max_size=6), st.sets(objs, max_size=4))
def test_binarize_round_trip(triples, pairs, singles):
    preds, schemas = _ternary()
    binz = binarize_predicates(schemas, preds)
    world = ({("between",) + t for t in triples} | {("on",) + p for p in pairs}
             | {("clear", x) for x in singles})
    goal = world_to_goal({("on",) + p for p in pairs})
    s = RelState(world, goal, ["a", "b", "c", "d"])
    b = binz.binarize_state(s)
    assert all(len(f) <= 3 for f in b.world | b.goal)
    assert binz.reconstruct_state(b) == s


def test_binarize_rejects_unsupported_arity():
    preds = [PredicateDecl("wide", 5)]
    with pytest.raises(DeclarationError):
        binarize_predicates([], preds)
