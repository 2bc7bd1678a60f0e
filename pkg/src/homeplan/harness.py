"""Pipeline variants, bundle validation and report emission."""

from __future__ import annotations

import itertools
import json
import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

from .client import (ChatClient, ModelClientError, ModelRequest, ParseFailure,
                     make_client, recover_structured)
from .completion import (CompletedStructure, CompletionRule, complete, default_rules,
                         load_rules)
from .evaluator import (DEFAULT_SEMANTICS, EvalOutcome, FailureClass, ProcessSemantics,
                        TokenCounter, check_goal_success, check_process_success,
                        classify, grounding_diagnostics, make_tokenizer, task_recovery,
                        token_budget, trajectory_recovery)
from .executor import CompileError, compile_goals
from .grounder import (build_grounding_prompt, expand_and_slice, oracle_nodes,
                       oracle_slice, parse_grounding_response, resolve_selections)
from .inference import build_inference_prompt, parse_goal_structure
from .prompts import action_prompt, retrieval_prompt
from .scene import (GoalAtom, SceneGraph, TaskInstance, load_task_bundle,
                    satisfies)
from .simulator import (BINARY_VERBS, Action, Verb, diff_scenes, parse_action_text,
                        run)


class PipelineVariant(str, Enum):
    NAIVE = "NAIVE"
    RETRIEVE_ACT = "RETRIEVE_ACT"
    GROUND_ACT = "GROUND_ACT"
    TASKGROUND = "TASKGROUND"
    TASKGROUND_NO_COMPLETION = "TASKGROUND_NO_COMPLETION"
    GT_SLICE_INFER_EXECUTE = "GT_SLICE_INFER_EXECUTE"
    GT_ORACLE = "GT_ORACLE"


class ConfigError(ValueError):
    """Raised before any task runs when the run cannot be set up."""


@dataclass(frozen=True)
class RunConfig:
    bundle: Path
    variant: PipelineVariant
    client: str | None
    out: Path
    rules: Path | None = None
    tokenizer: str = "approx"
    jobs: int = 1
    seed: int = 0
    model: str = "scripted"

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", PipelineVariant(self.variant))
        if self.jobs < 1:
            raise ConfigError("parallelism must be at least 1")
        if not Path(self.bundle).is_file():
            raise ConfigError(f"bundle {self.bundle} does not exist")
        if self.rules is not None and not Path(self.rules).is_file():
            raise ConfigError(f"rule file {self.rules} does not exist")
        if self.variant is not PipelineVariant.GT_ORACLE and not self.client:
            raise ConfigError(f"variant {self.variant.value} needs a model client")


# ---------------------------------------------------------------------------
# action parsing

class ActionParseError(ParseFailure):
    pass


_SUPPORTED = {v.value for v in Verb}
_TEXT_ENTRY = re.compile(r"^\s*\[?\s*([A-Za-z_]+)\s*\]?\s*(.*)$")


def _to_id(value: Any) -> int:
    if isinstance(value, bool):
        raise ActionParseError(f"invalid literal for int(): {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str) and re.fullmatch(r"\s*\d+\s*", value):
        return int(value)
    raise ActionParseError(f"invalid literal for int(): {value!r}")


def _entry_to_action(entry: Any) -> Action:
    if isinstance(entry, str):
        m = _TEXT_ENTRY.match(entry)
        if not m:
            raise ActionParseError(f"unreadable action {entry!r}")
        entry = [m.group(1), *m.group(2).split()]
    if not isinstance(entry, list) or not entry or not isinstance(entry[0], str):
        raise ActionParseError(f"unreadable action {entry!r}")
    verb = entry[0].strip().strip("[]").upper()
    if verb not in _SUPPORTED:
        raise ActionParseError(f"unsupported verb {verb!r}")
    rest = entry[1:]
    # "[VERB] class id [class id]" carries names; bare "[VERB] id [id]" does not
    if rest and isinstance(rest[0], str) and not rest[0].strip().isdigit():
        names, ids = rest[0::2], rest[1::2]
        if len(names) != len(ids):
            raise ActionParseError(f"{verb}: object name without an id in {entry!r}")
    else:
        ids = rest
    ids = [_to_id(i) for i in ids]
    want = 2 if Verb(verb) in BINARY_VERBS else 1
    if len(ids) != want:
        raise ActionParseError(f"{verb} takes {want} argument(s), got {len(ids)}")
    return Action(Verb(verb), *ids)


def parse_action_sequence(response: str) -> list[Action]:
    """Actions from a model response; one bad entry fails the whole sequence.

    Entries may be lists (``["WALK", "sink", 12]``) or text
    (``"[WALK] sink 12"``). Object names are informational; ids decide.
    """
    doc = recover_structured(response)
    if isinstance(doc, dict):
        lists = [v for v in doc.values() if isinstance(v, list)]
        if len(lists) != 1:
            raise ActionParseError("expected a JSON list of action commands")
        doc = lists[0]
    return [_entry_to_action(e) for e in doc]


def parse_retrieval_response(response: str) -> list[int]:
    doc = recover_structured(response)
    ids = doc.get("object_ids") if isinstance(doc, dict) else doc
    if not isinstance(ids, list):
        raise ParseFailure("retrieval response has no object_ids list")
    return [i for i in ids if isinstance(i, int) and not isinstance(i, bool)]


def retrieval_slice(ids: Sequence[int], scene: SceneGraph) -> SceneGraph:
    """Chosen ids plus their rooms and the agent; no ancestor expansion."""
    keep = {i for i in ids if i in scene}
    keep |= {r for i in list(keep) if (r := scene.room_of(i)) is not None}
    keep.add(scene.agent_id)
    return scene.subgraph(keep)


# ---------------------------------------------------------------------------
# running one task

@dataclass
class _Run:
    task: TaskInstance
    client: ChatClient | None
    model: str
    calls: list[dict] = field(default_factory=list)

    def ask(self, stage: str, prompt: str) -> str:
        entry = {"stage": stage, "prompt": prompt, "response": None}
        self.calls.append(entry)
        if self.client is None:
            raise ParseFailure(f"{stage}: no model client configured")
        req = ModelRequest(prompt, model_name=self.model, tag=(self.task.id, stage))
        try:
            text = self.client.complete_chat(req).text
        except ModelClientError as exc:
            entry["error"] = f"{exc.kind.value}: {exc}"
            raise ParseFailure(f"{stage}: model call failed ({exc.kind.value}: {exc})") \
                from None
        entry["response"] = text
        return text


@dataclass(frozen=True)
class PipelineContext:
    client: ChatClient | None
    rules: Sequence[CompletionRule]
    tokenizer: TokenCounter
    semantics: ProcessSemantics = DEFAULT_SEMANTICS
    model: str = "scripted"


def _referenced(actions: Sequence[Action], scene: SceneGraph) -> SceneGraph:
    return scene.subgraph({a for act in actions for a in act.args if a in scene})


def evaluate_task(task: TaskInstance, variant: PipelineVariant,
                  ctx: PipelineContext) -> EvalOutcome:
    """Run one variant end to end on one task. Never raises for task-level
    failures; they become the outcome's failure class."""
    variant = PipelineVariant(variant)
    r = _Run(task, ctx.client, ctx.model)
    scene = task.scene
    public = task.public_view()
    transcript: dict[str, Any] = {"task_id": task.id, "variant": variant.value,
                                  "calls": r.calls}
    slice_: SceneGraph | None = None
    structure: CompletedStructure | None = None
    actions: list[Action] = []
    detail = ""
    parse_failed = False
    try:
        if variant is PipelineVariant.NAIVE:
            actions = parse_action_sequence(
                r.ask("act", action_prompt(public.request, scene)))
        elif variant is PipelineVariant.RETRIEVE_ACT:
            ids = parse_retrieval_response(
                r.ask("retrieve", retrieval_prompt(public.request, scene)))
            slice_ = retrieval_slice(ids, scene)
            actions = parse_action_sequence(
                r.ask("act", action_prompt(public.request, slice_)))
        elif variant is PipelineVariant.GROUND_ACT:
            slice_ = _ground(r, public, scene)
            actions = parse_action_sequence(
                r.ask("act", action_prompt(public.request, slice_)))
        elif variant is PipelineVariant.GT_ORACLE:
            structure = complete(task.hidden_goals, scene, ctx.rules)
            actions, detail = _compile(structure, scene)
        else:
            if variant is PipelineVariant.GT_SLICE_INFER_EXECUTE:
                slice_ = oracle_slice(task)
            else:
                slice_ = _ground(r, public, scene)
            goals = parse_goal_structure(
                r.ask("infer", build_inference_prompt(public, slice_)), slice_)
            transcript["dropped_goals"] = [
                {"entry": d.entry, "reason": d.reason.value} for d in goals.dropped]
            if variant is PipelineVariant.TASKGROUND_NO_COMPLETION:
                structure = CompletedStructure.from_atoms(goals.atoms)
            else:
                structure = complete(goals.atoms, slice_, ctx.rules)
            actions, detail = _compile(structure, slice_)
    except ParseFailure as exc:
        parse_failed = True
        detail = f"parse failure: {exc}"

    per_call, _ = token_budget([c["prompt"] for c in r.calls], ctx.tokenizer)
    transcript["tokens"] = per_call
    if slice_ is not None:
        transcript["slice_nodes"] = sorted(slice_.nodes)
    if structure is not None:
        transcript["structure"] = [
            {"atom": str(a), "source": p}
            for a, p in zip(structure.atoms, structure.provenance)]
    process_task = task.is_process_task

    if parse_failed:
        transcript["detail"] = detail
        return EvalOutcome(task.id, False, False if process_task else None,
                           FailureClass.PARSE_FAIL, tokens=tuple(per_call),
                           environment=task.environment, detail=detail,
                           transcript=transcript)

    traj = run(scene, actions)
    transcript["actions"] = [a.render(scene) for a in actions]
    transcript["steps"] = [
        {"action": a.render(scene), "diff": diff_scenes(before, after)}
        for (a, after), before in zip(traj.steps, traj.states)]
    if slice_ is None:
        # direct-action and oracle runs have no slice: score what the actions touch
        slice_ = _referenced(actions, scene)
    diag = grounding_diagnostics(slice_, oracle_nodes(task), scene)
    if structure is not None:
        rec = task_recovery(structure, task)
    else:
        rec = trajectory_recovery(traj, task, ctx.semantics)

    if traj.failed:
        action, err = traj.failure
        detail = f"{action.render(scene)}: {err.message}"
        transcript["sim_error"] = {"kind": err.kind.value, "message": err.message}
        fc, goal_ok, proc_ok = FailureClass.SIM_FAIL, False, \
            (False if process_task else None)
    else:
        goal_ok = check_goal_success(traj.final, task.hidden_goals)
        proc_ok = (check_process_success(traj, task.hidden_goals,
                                         task.hidden_constraints, ctx.semantics)
                   if process_task else None)
        fc = classify(goal_ok, proc_ok)
        if fc is FailureClass.GOAL_FAIL:
            unmet = [g.render(scene) for g in task.hidden_goals
                     if not satisfies(traj.final, g)]
            detail = "; ".join(filter(None, [detail, "unmet: " + ", ".join(unmet)]))
        elif fc is FailureClass.PROCESS_FAIL:
            detail = "; ".join(filter(None, [detail, "process constraints violated"]))
    transcript["detail"] = detail
    return EvalOutcome(task.id, goal_ok, proc_ok, fc, recall=diag.recall,
                       precision=diag.precision, task_recovery=rec,
                       tokens=tuple(per_call), environment=task.environment,
                       detail=detail, transcript=transcript)


def _ground(r: _Run, public, scene: SceneGraph) -> SceneGraph:
    selections = parse_grounding_response(r.ask("ground", build_grounding_prompt(public)))
    return expand_and_slice(resolve_selections(selections, scene), scene)


def _compile(structure: CompletedStructure, world: SceneGraph) -> tuple[list[Action], str]:
    """Compiled actions; on failure, the prefix compiled before the bad atom."""
    try:
        return compile_goals(structure.atoms, world), ""
    except CompileError as exc:
        return exc.partial, f"compile: {exc}"


def run_tasks(tasks: Sequence[TaskInstance], variant: PipelineVariant,
              ctx: PipelineContext, jobs: int = 1) -> list[EvalOutcome]:
    """Evaluate every task (at most ``jobs`` at once); results sorted by id."""
    def one(task: TaskInstance) -> EvalOutcome:
        return evaluate_task(task, variant, ctx)

    if jobs == 1:
        outcomes = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, tasks))
    return sorted(outcomes, key=lambda o: o.task_id)


def run_pipeline(config: RunConfig, client: ChatClient | None = None) -> list[EvalOutcome]:
    """Load, run and write the report. ``client`` overrides ``config.client``."""
    try:
        tasks = load_task_bundle(Path(config.bundle).read_text())
        rules = load_rules(Path(config.rules).read_text()) if config.rules \
            else default_rules()
        tokenizer = make_tokenizer(config.tokenizer)
        if client is None and config.client:
            client = make_client(config.client)
    except (OSError, ValueError, RuntimeError, ModelClientError) as exc:
        raise ConfigError(str(exc)) from exc
    if not tasks:
        raise ConfigError(f"bundle {config.bundle} holds no tasks")
    ctx = PipelineContext(client, rules, tokenizer, model=config.model)
    outcomes = run_tasks(tasks, config.variant, ctx, config.jobs)
    naive_ref = {t.id: tokenizer.count(action_prompt(t.request, t.scene)) for t in tasks}
    emit_report(outcomes, config.out, {
        "variant": config.variant.value,
        "tokenizer": tokenizer.name,
        "bundle": Path(config.bundle).name,
    }, naive_reference=naive_ref)
    return outcomes


# ---------------------------------------------------------------------------
# reports

def _mean(values: Sequence[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def _block(outcomes: Sequence[EvalOutcome]) -> dict[str, Any]:
    proc = [o for o in outcomes if o.process_success is not None]
    return {
        "tasks": len(outcomes),
        "goal_sr": _mean([float(o.goal_success) for o in outcomes]),
        "process_tasks": len(proc),
        "process_sr": _mean([float(o.process_success) for o in proc]),
        "mean_recall": _mean([o.recall for o in outcomes]),
        "mean_precision": _mean([o.precision for o in outcomes]),
        "mean_task_recovery": _mean([o.task_recovery for o in outcomes]),
        "input_tokens": sum(sum(o.tokens) for o in outcomes),
        "model_calls": sum(len(o.tokens) for o in outcomes),
    }


def aggregate(outcomes: Sequence[EvalOutcome],
              naive_reference: dict[str, int] | None = None) -> dict[str, Any]:
    agg = _block(outcomes)
    agg["failure_classes"] = {fc.value: sum(o.failure_class is fc for o in outcomes)
                              for fc in FailureClass}
    agg["by_environment"] = {
        env: _block([o for o in outcomes if o.environment == env])
        for env in sorted({o.environment for o in outcomes})}
    if naive_reference is not None:
        ref = sum(naive_reference.get(o.task_id, 0) for o in outcomes)
        agg["naive_reference_tokens"] = ref
        agg["reduction_vs_naive"] = ref / agg["input_tokens"] if agg["input_tokens"] else None
    return agg


def outcome_to_dict(o: EvalOutcome) -> dict[str, Any]:
    return {
        "task_id": o.task_id,
        "environment": o.environment,
        "outcome": "PASS" if o.passed else o.failure_class.value,
        "failure_class": o.failure_class.value,
        "goal_success": o.goal_success,
        "process_success": o.process_success,
        "recall": o.recall,
        "precision": o.precision,
        "task_recovery": o.task_recovery,
        "tokens": list(o.tokens),
        "detail": o.detail,
    }


def _pct(v: float | None) -> str:
    return "-" if v is None else f"{100 * v:.1f}"


def render_summary(report: dict[str, Any]) -> str:
    meta, agg = report["meta"], report["aggregate"]
    lines = [f"variant: {meta.get('variant', '?')}    tokenizer: {meta.get('tokenizer', '?')}"
             f"    tasks: {agg['tasks']}", ""]
    head = f"{'environment':<14}{'Goal SR':>9}{'Process SR':>12}{'Recall':>9}" \
           f"{'Prec.':>8}{'Task Rec.':>11}{'tokens':>10}"
    lines += [head, "-" * len(head)]
    rows = list(agg["by_environment"].items()) + [("All", agg)]
    for name, b in rows:
        lines.append(f"{name:<14}{_pct(b['goal_sr']):>9}{_pct(b['process_sr']):>12}"
                     f"{_pct(b['mean_recall']):>9}{_pct(b['mean_precision']):>8}"
                     f"{_pct(b['mean_task_recovery']):>11}{b['input_tokens']:>10}")
    if agg.get("reduction_vs_naive") is not None:
        lines.append(f"\ntoken reduction vs full-scene action prompt: "
                     f"{agg['reduction_vs_naive']:.1f}x")
    fcs = agg["failure_classes"]
    counts = ", ".join(f"{fc.value}={fcs[fc.value]}" for fc in FailureClass
                       if fcs.get(fc.value))
    lines += [f"outcomes: {counts}", ""]
    head = f"{'task':<22}{'outcome':<14}{'Recall':>8}{'Prec.':>8}{'Task Rec.':>11}{'tokens':>9}"
    lines += [head, "-" * len(head)]
    for t in report["tasks"]:
        lines.append(f"{t['task_id']:<22}{t['outcome']:<14}{_pct(t['recall']):>8}"
                     f"{_pct(t['precision']):>8}{_pct(t['task_recovery']):>11}"
                     f"{sum(t['tokens']):>9}")
    return "\n".join(lines) + "\n"


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _safe_name(task_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", task_id)


def emit_report(outcomes: Sequence[EvalOutcome], out_dir: str | Path,
                meta: dict[str, Any] | None = None,
                naive_reference: dict[str, int] | None = None) -> dict[str, Any]:
    """Write report.json, summary.txt and transcripts/<task>.json."""
    if not outcomes:
        raise ValueError("no outcomes to report")
    outcomes = sorted(outcomes, key=lambda o: o.task_id)
    report = {
        "meta": dict(meta or {}),
        "aggregate": aggregate(outcomes, naive_reference),
        "tasks": [outcome_to_dict(o) for o in outcomes],
    }
    out = Path(out_dir)
    tdir = out / "transcripts"
    tdir.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dump(report))
    (out / "summary.txt").write_text(render_summary(report))
    for o in outcomes:
        (tdir / f"{_safe_name(o.task_id)}.json").write_text(_dump(o.transcript))
    return report


def render_report(in_dir: str | Path) -> str:
    """Re-render summary.txt from an existing report.json."""
    in_dir = Path(in_dir)
    report = json.loads((in_dir / "report.json").read_text())
    text = render_summary(report)
    (in_dir / "summary.txt").write_text(text)
    return text


# ---------------------------------------------------------------------------
# bundle validation

class Differentiation(str, Enum):
    WITNESS_FOUND = "WITNESS_FOUND"
    INCONCLUSIVE = "INCONCLUSIVE"
    SKIPPED = "SKIPPED"


@dataclass(frozen=True)
class TaskValidation:
    task_id: str
    status: str                     # PASS or REJECTED
    reason: str
    differentiation: Differentiation
    witness: tuple[str, ...] = ()
    permutations_tried: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"task_id": self.task_id, "status": self.status, "reason": self.reason,
                "differentiation": self.differentiation.value,
                "witness": list(self.witness),
                "permutations_tried": self.permutations_tried}


def _permutations(goals: Sequence[GoalAtom], cap: int,
                  rng: random.Random) -> list[tuple[GoalAtom, ...]]:
    n = len(goals)
    if math.factorial(n) <= cap:
        return list(itertools.permutations(goals))
    seen: set[tuple[int, ...]] = set()
    out = []
    idx = list(range(n))
    while len(out) < cap:
        rng.shuffle(idx)
        key = tuple(idx)
        if key not in seen:
            seen.add(key)
            out.append(tuple(goals[i] for i in key))
    return out


def validate_task(task: TaskInstance, rules: Sequence[CompletionRule], seed: int = 0,
                  perm_cap: int = 720,
                  semantics: ProcessSemantics = DEFAULT_SEMANTICS) -> TaskValidation:
    scene = task.scene
    if task.gt_actions is None:
        status, reason = "REJECTED", "missing gt_actions"
    else:
        status, reason = "PASS", ""
        try:
            actions = [parse_action_text(a) for a in task.gt_actions]
        except ValueError as exc:
            actions, status, reason = [], "REJECTED", f"bad gt_actions entry: {exc}"
        if status == "PASS":
            traj = run(scene, actions)
            unmet = [g for g in task.hidden_goals if not satisfies(traj.final, g)]
            if traj.failed:
                a, err = traj.failure
                status, reason = "REJECTED", f"step failure at {a.render(scene)}: {err.message}"
            elif unmet:
                status = "REJECTED"
                reason = "unmet goal(s): " + ", ".join(g.render(scene) for g in unmet)
            elif task.is_process_task and not check_process_success(
                    traj, task.hidden_goals, task.hidden_constraints, semantics):
                status, reason = "REJECTED", "process constraints violated"

    if not task.is_process_task:
        return TaskValidation(task.id, status, reason, Differentiation.SKIPPED)
    # the rng is seeded per task so results do not depend on bundle order
    rng = random.Random(f"{seed}:{task.id}")
    perms = _permutations(task.hidden_goals, perm_cap, rng)
    for k, perm in enumerate(perms, 1):
        structure = complete(perm, scene, rules)
        try:
            actions = compile_goals(structure.atoms, scene)
        except CompileError:
            continue
        traj = run(scene, actions)
        if traj.failed or not check_goal_success(traj.final, task.hidden_goals):
            continue
        if not check_process_success(traj, task.hidden_goals, task.hidden_constraints,
                                     semantics):
            return TaskValidation(task.id, status, reason, Differentiation.WITNESS_FOUND,
                                  tuple(g.render(scene) for g in perm), k)
    return TaskValidation(task.id, status, reason, Differentiation.INCONCLUSIVE,
                          permutations_tried=len(perms))


def validate_tasks(tasks: Sequence[TaskInstance], rules: Sequence[CompletionRule],
                   seed: int = 0, perm_cap: int = 720) -> list[TaskValidation]:
    if perm_cap < 1:
        raise ConfigError("permutation cap must be at least 1")
    return sorted((validate_task(t, rules, seed, perm_cap) for t in tasks),
                  key=lambda v: v.task_id)


def write_validation(results: Sequence[TaskValidation], out_dir: str | Path) -> str:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.json").write_text(_dump([r.to_dict() for r in results]))
    lines = [f"{'task':<22}{'status':<10}{'differentiation':<16}reason"]
    for r in results:
        lines.append(f"{r.task_id:<22}{r.status:<10}{r.differentiation.value:<16}{r.reason}")
    text = "\n".join(lines) + "\n"
    (out / "validation.txt").write_text(text)
    return text
