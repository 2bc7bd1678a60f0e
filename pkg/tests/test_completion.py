import random

import pytest
from hypothesis import given, settings, strategies as st

from homeplan.builder import SceneBuilder
from homeplan.completion import (INFERRED, CompletionError, RuleError, complete,
                                 default_rules, load_rules)
from homeplan.scene import GoalAtom

import helpers

RULES = default_rules()


def dishwasher():
    b = SceneBuilder()
    k = b.room(1, "kitchen")
    b.agent(2, k)
    b.obj(3, "counter", inside=k, states=["DIRTY"], props=["SURFACE"])
    b.obj(4, "cup", on=3, states=["DIRTY"], props=["GRABBABLE", "WASHABLE"])
    b.obj(5, "dishwasher", inside=k, states=["CLOSED", "OFF"],
          props=["CAN_OPEN", "CONTAINER", "HAS_SWITCH"])
    b.obj(6, "table", inside=k, states=["DIRTY"], props=["SURFACE"])
    b.obj(7, "shelf", inside=k, props=["SURFACE"])
    return b.build()


def A(pred, *args):
    return GoalAtom(pred, args)


def test_default_bundle_has_three_rules():
    assert [r.id for r in RULES] == ["R1", "R2", "R3"]


def test_dishwasher_example():
    out = complete([A("INSIDE", 4, 5), A("ON", 5)], dishwasher(), RULES)
    assert out.atoms == (A("INSIDE", 4, 5), A("CLOSED", 5), A("ON", 5))
    assert out.provenance == (INFERRED, "R2", INFERRED)


def test_fig2_on_bundled_scene():
    scene = helpers.task("vp_dishwasher_mug").scene
    out = complete([A("INSIDE", 296, 291), A("ON", 291)], scene, RULES)
    assert out.atoms == (A("INSIDE", 296, 291), A("CLOSED", 291), A("ON", 291))


def test_r1_alone():
    out = complete([A("ON", 5)], dishwasher(), RULES)
    assert out.atoms == (A("CLOSED", 5), A("ON", 5))
    assert out.provenance == ("R1", INFERRED)


def test_r3_cleans_dirty_destination():
    out = complete([A("ON", 4, 6)], dishwasher(), RULES)
    assert out.atoms == (A("CLEAN", 6), A("ON", 4, 6))
    assert complete([A("ON", 4, 7)], dishwasher(), RULES).atoms == (A("ON", 4, 7),)


def test_teaser_placement():
    scene = helpers.task("vp_teaser_office").scene
    out = complete([A("ON", 2009, 355)], scene, RULES)
    assert out.atoms == (A("CLEAN", 355), A("ON", 2009, 355))


def test_already_complete_input_is_unchanged():
    seq = [A("INSIDE", 4, 5), A("CLOSED", 5), A("ON", 5)]
    assert complete(seq, dishwasher(), RULES).atoms == tuple(seq)


def test_empty_rules_and_empty_goals():
    assert load_rules('{"rules": []}') == []
    seq = [A("ON", 4, 6)]
    assert complete(seq, dishwasher(), []).atoms == tuple(seq)
    assert complete([], dishwasher(), RULES).atoms == ()


@pytest.mark.parametrize("rule, fragment", [
    ({"id": "X", "trigger": {"predicate": "ON", "arity": 1},
      "insert": {"predicate": "CLOSED", "bind": [1]}, "placement": "BEFORE_TRIGGER"},
     "not bound by the trigger"),
    ({"id": "X", "trigger": {"predicate": "DIRTY", "arity": 1},
      "insert": {"predicate": "CLOSED", "bind": [0]}, "placement": "BEFORE_TRIGGER"},
     "trigger.predicate"),
    ({"id": "X", "trigger": {"predicate": "ON", "arity": 1},
      "insert": {"predicate": "CLOSED", "bind": [0]}, "placement": "SOMETIME"},
     "placement"),
    ({"id": "X", "trigger": {"predicate": "ON", "arity": 3},
      "insert": {"predicate": "CLOSED", "bind": [0]}, "placement": "AFTER_TRIGGER"},
     "arity"),
    ({"id": "X", "trigger": {"predicate": "ON", "arity": 1,
                             "arg_property": {"arg": 0, "property": "SHINY"}},
      "insert": {"predicate": "CLOSED", "bind": [0]}, "placement": "AFTER_TRIGGER"},
     "SHINY"),
])
def test_rule_schema_errors(rule, fragment):
    with pytest.raises(RuleError, match=fragment):
        load_rules({"rules": [rule]})


def test_duplicate_rule_ids():
    r = {"id": "X", "trigger": {"predicate": "ON", "arity": 1},
         "insert": {"predicate": "CLOSED", "bind": [0]}, "placement": "AFTER_TRIGGER"}
    with pytest.raises(RuleError, match="duplicate"):
        load_rules({"rules": [r, r]})


def test_rule_chain_is_followed_to_a_fixed_point():
    # CLOSED(x) triggers OFF(x), which in turn triggers PLUGGED_OUT(x)
    rules = load_rules({"rules": [
        {"id": "A", "trigger": {"predicate": "CLOSED", "arity": 1},
         "insert": {"predicate": "OFF", "bind": [0]}, "placement": "AFTER_TRIGGER"},
        {"id": "B", "trigger": {"predicate": "OFF", "arity": 1},
         "insert": {"predicate": "PLUGGED_OUT", "bind": [0]}, "placement": "AFTER_TRIGGER"},
    ]})
    out = complete([A("CLOSED", 5)], dishwasher(), rules)
    assert out.atoms == (A("CLOSED", 5), A("OFF", 5), A("PLUGGED_OUT", 5))


def test_long_before_chain_settles_within_the_cap():
    rules = load_rules({"rules": [
        {"id": f"C{i}", "trigger": {"predicate": p, "arity": 1},
         "insert": {"predicate": q, "bind": [0]}, "placement": "BEFORE_TRIGGER"}
        for i, (p, q) in enumerate([("ON", "OFF"), ("OFF", "OPEN"), ("OPEN", "CLOSED"),
                                    ("CLOSED", "CLEAN"), ("CLEAN", "PLUGGED_IN"),
                                    ("PLUGGED_IN", "PLUGGED_OUT")])
    ]})
    # each BEFORE insertion lands behind the scan, so every link costs a pass
    out = complete([A("ON", 5)], dishwasher(), rules)
    assert len(out.atoms) == 7


def test_iteration_cap_raises(monkeypatch):
    import homeplan.completion as mod
    monkeypatch.setattr(mod, "MAX_PASSES", 1)
    rules = load_rules({"rules": [
        {"id": "B", "trigger": {"predicate": "OFF", "arity": 1},
         "insert": {"predicate": "OPEN", "bind": [0]}, "placement": "BEFORE_TRIGGER"},
        {"id": "A", "trigger": {"predicate": "ON", "arity": 1},
         "insert": {"predicate": "OFF", "bind": [0]}, "placement": "BEFORE_TRIGGER"},
    ]})
    # OFF lands behind the scan, so B needs a second pass the cap forbids
    with pytest.raises(CompletionError):
        complete([A("ON", 5)], dishwasher(), rules)


def _random_case(seed):
    rng = random.Random(seed)
    g = helpers.random_world(rng)
    return g, helpers.random_goal_sequence(rng, g, max_len=5)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_idempotent_and_conservative(seed):
    g, goals = _random_case(seed)
    out = complete(goals, g, RULES)
    assert complete(out.atoms, g, RULES).atoms == out.atoms
    inferred = [a for a, p in zip(out.atoms, out.provenance) if p == INFERRED]
    assert inferred == goals
    assert len(set(out.atoms)) == len(out.atoms)
    assert len(out.atoms) <= len(goals) * (1 + len(RULES))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_placement_is_correct(seed):
    g, goals = _random_case(seed)
    out = complete(goals, g, RULES)
    pos = {a: i for i, a in enumerate(out.atoms)}
    for a, p in zip(out.atoms, out.provenance):
        if p == "R1":
            assert pos[a] < pos[A("ON", a.args[0])]
        elif p == "R3":
            trig = [x for x in out.atoms if not x.is_unary and x.args[1] == a.args[0]]
            assert any(pos[a] < pos[t] for t in trig)
        elif p == "R2":
            trig = [x for x in out.atoms if x.predicate == "INSIDE" and x.args[1] == a.args[0]]
            assert any(pos[a] > pos[t] for t in trig)
