import json
from pathlib import Path

import pytest

from homeplan.client import (ClientErrorKind, CountingClient, ModelClientError, ParseFailure,
                             ScriptedClient)
from homeplan.completion import default_rules
from homeplan.evaluator import ApproxTokenizer, EvalOutcome, FailureClass
from homeplan.harness import (ActionParseError, ConfigError, Differentiation, PipelineContext,
                              PipelineVariant, RunConfig, aggregate, emit_report,
                              evaluate_task, parse_action_sequence, parse_retrieval_response,
                              render_report, retrieval_slice, run_pipeline, run_tasks,
                              validate_task, validate_tasks)
from homeplan.scene import load_task_bundle
from homeplan.simulator import Action, Verb

import helpers

BUDGET = {
    PipelineVariant.NAIVE: 1,
    PipelineVariant.RETRIEVE_ACT: 2,
    PipelineVariant.GROUND_ACT: 2,
    PipelineVariant.TASKGROUND: 2,
    PipelineVariant.TASKGROUND_NO_COMPLETION: 2,
    PipelineVariant.GT_SLICE_INFER_EXECUTE: 1,
    PipelineVariant.GT_ORACLE: 0,
}
FIXTURES = Path(__file__).parent / "fixtures"


def ctx(client=None):
    if client is None:
        client = ScriptedClient.from_file(helpers.scripted_path())
    return PipelineContext(client, default_rules(), ApproxTokenizer())


# -- action parsing ------------------------------------------------------------

def test_parse_list_entries():
    text = '[["WALK", "sink", 12], ["GRAB", "cup", "7"], ["PUTBACK", "cup", 7, "table", 3]]'
    assert parse_action_sequence(text) == [
        Action(Verb.WALK, 12), Action(Verb.GRAB, 7), Action(Verb.PUTBACK, 7, 3)]


def test_parse_text_entries_inside_prose_and_object():
    text = 'Plan:\n{"actions": ["[WALK] rag 3001", "[grab] rag 3001", "WIPE 230", ' \
           '"[SWITCHON] tv 410"]}'
    assert parse_action_sequence(text) == [
        Action(Verb.WALK, 3001), Action(Verb.GRAB, 3001), Action(Verb.WIPE, 230),
        Action(Verb.SWITCHON, 410)]


def test_parse_five_actions_in_order():
    acts = [["WALK", "window", 420], ["CLOSE", "window", 420], ["WALK", "rag", 3001],
            ["GRAB", "rag", 3001], ["WIPE", "table", 355]]
    out = parse_action_sequence(json.dumps(acts))
    assert [a.verb.value for a in out] == ["WALK", "CLOSE", "WALK", "GRAB", "WIPE"]


@pytest.mark.parametrize("text, message", [
    ('[["WALK", "dining_area", "dining_area_id"]]', "invalid literal for int(): 'dining_area_id'"),
    ('[["FIND", "bread", 3000]]', "unsupported verb 'FIND'"),
    ('[["PUTIN", "bread", 3000]]', "PUTIN takes 2 argument(s), got 1"),
    ('[["WALK", "a", 1, "b", 2]]', "WALK takes 1 argument(s), got 2"),
    ('[["GRAB", "cup"]]', "object name without an id"),
    ('[["WALK", "x", true]]', "invalid literal for int(): True"),
    ('[42]', "unreadable action"),
    ('{"a": [], "b": []}', "expected a JSON list"),
])
def test_one_bad_entry_fails_the_sequence(text, message):
    with pytest.raises(ActionParseError) as info:
        parse_action_sequence('[["WALK", "sink", 12], ' + text[1:] if text.startswith("[[")
                              else text)
    assert message in str(info.value)


def test_parse_without_structure():
    with pytest.raises(ParseFailure):
        parse_action_sequence("I would walk to the sink.")


def test_retrieval_response_and_slice():
    assert parse_retrieval_response('ids: {"object_ids": [3000, "x", 352, true]}') == [3000, 352]
    scene = helpers.task("vg066_bread_couch").scene
    s = retrieval_slice([3000, 352, 99999], scene)
    # chosen ids, their rooms and the agent; the freezer is not added
    assert set(s.nodes) == {3000, 201, 352, 319, 65}
    with pytest.raises(ParseFailure):
        parse_retrieval_response('{"ids": 3}')


# -- running -------------------------------------------------------------------

@pytest.mark.parametrize("variant", list(PipelineVariant))
def test_call_budget_per_variant(variant):
    client = CountingClient(ScriptedClient.from_file(helpers.scripted_path()))
    outcomes = run_tasks(helpers.sample_tasks(), variant, ctx(client))
    assert client.calls == sum(len(o.tokens) for o in outcomes)
    for o in outcomes:
        if o.failure_class is not FailureClass.PARSE_FAIL:
            assert len(o.tokens) == BUDGET[variant], o.task_id


def test_oracle_makes_no_calls_and_passes_everything():
    client = CountingClient(ScriptedClient({}))
    outcomes = run_tasks(helpers.sample_tasks(), PipelineVariant.GT_ORACLE, ctx(client))
    assert client.calls == 0
    assert all(o.passed for o in outcomes)


def test_every_task_is_reported_once_in_id_order():
    tasks = helpers.sample_tasks()
    for variant in PipelineVariant:
        outcomes = run_tasks(tasks[::-1], variant, ctx())
        assert [o.task_id for o in outcomes] == sorted(t.id for t in tasks)


def test_serial_and_parallel_runs_agree(tmp_path):
    a = run_tasks(helpers.sample_tasks(), PipelineVariant.TASKGROUND, ctx(), jobs=1)
    b = run_tasks(helpers.sample_tasks(), PipelineVariant.TASKGROUND, ctx(), jobs=4)
    assert a == b
    emit_report(a, tmp_path / "a")
    emit_report(b, tmp_path / "b")
    for name in ("report.json", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_appendix_failures_reproduce():
    by_id = {o.task_id: o for o in run_tasks(helpers.sample_tasks(), PipelineVariant.NAIVE,
                                             ctx())}
    assert by_id["vg066_bread_couch"].failure_class is FailureClass.PARSE_FAIL
    assert "invalid literal for int(): 'dining_area_id'" in by_id["vg066_bread_couch"].detail
    lamp = by_id["vg016_lights_out"]
    assert lamp.failure_class is FailureClass.SIM_FAIL
    assert lamp.transcript["sim_error"]["message"] == "<ceilinglamp>(96) does not have a switch"
    assert by_id["vg133_lunch_prep"].failure_class is FailureClass.GOAL_FAIL
    assert "CLEAN(cup.2009)" in by_id["vg133_lunch_prep"].detail


def test_completion_ablation_loses_a_task():
    full = run_tasks(helpers.sample_tasks(), PipelineVariant.TASKGROUND, ctx())
    bare = run_tasks(helpers.sample_tasks(), PipelineVariant.TASKGROUND_NO_COMPLETION, ctx())
    assert sum(o.passed for o in full) > sum(o.passed for o in bare)
    plate = next(o for o in bare if o.task_id == "vp_plate_on_table")
    assert plate.failure_class is FailureClass.GOAL_FAIL


class _Broken:
    def complete_chat(self, req):
        raise ModelClientError(ClientErrorKind.TRANSPORT_FAILURE, "HTTP 500", 4)


def test_persistent_client_failure_is_counted_not_raised():
    outcomes = run_tasks(helpers.sample_tasks(), PipelineVariant.TASKGROUND, ctx(_Broken()))
    assert len(outcomes) == len(helpers.sample_tasks())
    assert {o.failure_class for o in outcomes} == {FailureClass.PARSE_FAIL}
    assert "TRANSPORT_FAILURE" in outcomes[0].detail


def test_transcript_contents():
    o = evaluate_task(helpers.task("vp_teaser_office"), PipelineVariant.TASKGROUND, ctx())
    t = o.transcript
    assert [c["stage"] for c in t["calls"]] == ["ground", "infer"]
    assert all(c["prompt"] and c["response"] for c in t["calls"])
    assert t["actions"][0] == "[WALK] window 420"
    assert len(t["steps"]) == len(t["actions"])
    assert t["steps"][1] == {"action": "[CLOSE] window 420",
                             "diff": {"edges_added": [], "edges_removed": [],
                                      "states_changed": {"420": ["CLOSED"]}}}
    assert o.recall is not None and o.task_recovery == 1.0


# -- reports -------------------------------------------------------------------

def _three():
    return [EvalOutcome("a", True, None, FailureClass.NONE, recall=1.0, precision=0.5,
                        tokens=(10, 5), environment="VirtualHome"),
            EvalOutcome("b", False, None, FailureClass.GOAL_FAIL, tokens=(7, 3),
                        environment="VirtualHome"),
            EvalOutcome("c", False, False, FailureClass.SIM_FAIL, tokens=(4, 1),
                        environment="BEHAVIOR")]


def test_aggregate_of_three():
    agg = aggregate(_three(), {"a": 100, "b": 100, "c": 100})
    assert agg["goal_sr"] == pytest.approx(1 / 3)
    assert agg["process_tasks"] == 1 and agg["process_sr"] == 0.0
    assert agg["input_tokens"] == 30 and agg["model_calls"] == 6
    assert agg["reduction_vs_naive"] == 10.0
    assert agg["failure_classes"]["SIM_FAIL"] == 1
    assert agg["by_environment"]["VirtualHome"]["goal_sr"] == 0.5


def test_aggregate_is_order_independent():
    o = _three()
    assert aggregate(o) == aggregate(o[::-1])


def test_emit_and_rerender(tmp_path):
    emit_report(_three(), tmp_path / "r", {"variant": "X"})
    files = sorted(p.relative_to(tmp_path / "r").as_posix()
                   for p in (tmp_path / "r").rglob("*") if p.is_file())
    assert files == ["report.json", "summary.txt", "transcripts/a.json",
                     "transcripts/b.json", "transcripts/c.json"]
    summary = (tmp_path / "r" / "summary.txt").read_text()
    assert "100.0" in summary and "50.0" in summary           # recall / precision columns
    assert render_report(tmp_path / "r") == summary
    emit_report(_three()[::-1], tmp_path / "s", {"variant": "X"})
    assert (tmp_path / "s" / "report.json").read_bytes() == \
        (tmp_path / "r" / "report.json").read_bytes()


def test_emit_needs_outcomes(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


def test_run_pipeline_writes_reports(tmp_path):
    bundle = tmp_path / "b.json"
    bundle.write_text(json.dumps({"tasks": [helpers.task("vp_teaser_office").to_dict()]}))
    cfg = RunConfig(bundle, "TASKGROUND", f"scripted:{helpers.scripted_path()}", tmp_path / "o")
    outcomes = run_pipeline(cfg)
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["meta"] == {"bundle": "b.json", "tokenizer": "approx",
                              "variant": "TASKGROUND"}
    assert [t["task_id"] for t in report["tasks"]] == ["vp_teaser_office"]
    assert outcomes[0].passed
    assert report["aggregate"]["naive_reference_tokens"] > report["aggregate"]["input_tokens"]


def test_config_errors(tmp_path):
    bundle = tmp_path / "b.json"
    bundle.write_text('{"tasks": []}')
    with pytest.raises(ConfigError):
        RunConfig(tmp_path / "missing.json", "NAIVE", "scripted:x", tmp_path)
    with pytest.raises(ConfigError):
        RunConfig(bundle, "NAIVE", None, tmp_path)
    with pytest.raises(ConfigError):
        RunConfig(bundle, "GT_ORACLE", None, tmp_path, jobs=0)
    with pytest.raises(ValueError):
        RunConfig(bundle, "GPT_MAGIC", None, tmp_path)
    with pytest.raises(ConfigError, match="no tasks"):
        run_pipeline(RunConfig(bundle, "GT_ORACLE", None, tmp_path / "o"))
    with pytest.raises(ConfigError):
        run_pipeline(RunConfig(bundle, "NAIVE", "scripted:/nope.json", tmp_path / "o"))
    with pytest.raises(ConfigError):
        run_pipeline(RunConfig(bundle, "GT_ORACLE", None, tmp_path / "o", tokenizer="wp"))


# -- validation ----------------------------------------------------------------

def test_teaser_has_a_differentiating_witness():
    v = validate_task(helpers.task("vp_teaser_office"), default_rules())
    assert v.status == "PASS"
    assert v.differentiation is Differentiation.WITNESS_FOUND
    assert v.witness


def test_broken_fixture_names_the_unmet_goal():
    tasks = load_task_bundle((FIXTURES / "broken_bundle.json").read_text())
    [v] = validate_tasks(tasks, default_rules())
    assert v.status == "REJECTED"
    assert v.reason == "unmet goal(s): ON(cup.2010, table.355)"


def test_goal_only_tasks_skip_differentiation():
    v = validate_task(helpers.task("vg016_lights_out"), default_rules())
    assert (v.status, v.differentiation) == ("PASS", Differentiation.SKIPPED)


def test_missing_gt_actions():
    t = helpers.task("vg016_lights_out")
    t = type(t)(**{**vars(t), "gt_actions": None})
    assert validate_task(t, default_rules()).reason == "missing gt_actions"


def test_validation_is_seeded_and_capped():
    tasks = helpers.sample_tasks()
    a = validate_tasks(tasks, default_rules(), seed=3, perm_cap=2)
    b = validate_tasks(tasks, default_rules(), seed=3, perm_cap=2)
    assert a == b
    assert all(v.permutations_tried <= 2 for v in a)
    with pytest.raises(ConfigError):
        validate_tasks(tasks, default_rules(), perm_cap=0)
