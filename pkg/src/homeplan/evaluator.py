"""Goal and process success, grounding diagnostics, task recovery, token budgets."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Protocol, Sequence

from .completion import CompletedStructure
from .scene import Category, GoalAtom, ProcessConstraint, SceneGraph, TaskInstance, satisfies
from .simulator import Trajectory

INF = math.inf


class FailureClass(str, Enum):
    NONE = "NONE"
    PARSE_FAIL = "PARSE_FAIL"
    SIM_FAIL = "SIM_FAIL"
    GOAL_FAIL = "GOAL_FAIL"
    PROCESS_FAIL = "PROCESS_FAIL"


@dataclass(frozen=True)
class ProcessSemantics:
    """How "achieved no later than" is read.

    ``strict`` requires the earlier condition to be reached at a strictly
    earlier state. ``holding`` additionally requires it to still hold at the
    state where the later condition is first reached.
    """

    strict: bool = False
    holding: bool = False


DEFAULT_SEMANTICS = ProcessSemantics()


def check_goal_success(final: SceneGraph, goals: Iterable[GoalAtom]) -> bool:
    # list first so every atom is checked for unknown ids, not just up to the first miss
    return all([satisfies(final, g) for g in goals])


def first_satisfaction_indices(states: Sequence[SceneGraph],
                               atoms: Iterable[GoalAtom]) -> dict[GoalAtom, float]:
    """First state index at which each atom holds, or ``inf``."""
    tracker = SatisfactionTracker(atoms)
    for s in states:
        tracker.observe(s)
    return tracker.first


class SatisfactionTracker:
    """Records first-satisfaction indices while states arrive one at a time."""

    def __init__(self, atoms: Iterable[GoalAtom]):
        self.first: dict[GoalAtom, float] = {a: INF for a in atoms}
        self._pending = list(self.first)
        self.t = -1

    def observe(self, state: SceneGraph) -> None:
        self.t += 1
        still = []
        for a in self._pending:
            if satisfies(state, a):
                self.first[a] = self.t
            else:
                still.append(a)
        self._pending = still


def constraint_holds(c: ProcessConstraint, first: dict[GoalAtom, float],
                     states: Sequence[SceneGraph],
                     semantics: ProcessSemantics = DEFAULT_SEMANTICS) -> bool:
    fi, fj = first[c.before], first[c.after]
    if fi == INF or fj == INF:
        return False
    if fi > fj or (semantics.strict and fi == fj):
        return False
    if semantics.holding and not satisfies(states[int(fj)], c.before):
        return False
    return True


def check_process_success(traj: Trajectory, goals: Sequence[GoalAtom],
                          constraints: Sequence[ProcessConstraint],
                          semantics: ProcessSemantics = DEFAULT_SEMANTICS) -> bool:
    """Final state meets every goal and each constraint's first-satisfaction
    indices are finite and ordered."""
    if traj.failed:
        return False
    states = traj.states
    if not check_goal_success(states[-1], goals):
        return False
    atoms = {a for c in constraints for a in (c.before, c.after)}
    first = first_satisfaction_indices(states, atoms)
    return all(constraint_holds(c, first, states, semantics) for c in constraints)


# ---------------------------------------------------------------------------
# diagnostics

@dataclass(frozen=True)
class GroundingDiagnostics:
    recall: float | None
    precision: float | None


def _objects(scene: SceneGraph, ids: Iterable[int]) -> set[int]:
    return {i for i in ids if i in scene
            and scene.nodes[i].category is Category.OBJECT}


def grounding_diagnostics(slice_: SceneGraph, oracle_nodes: Iterable[int],
                          scene: SceneGraph | None = None) -> GroundingDiagnostics:
    """Node recall and precision over objects only.

    ``scene`` classifies oracle ids (defaults to the slice, which is enough
    whenever the oracle nodes are themselves present). An empty denominator
    leaves the value as ``None``.
    """
    ref = scene if scene is not None else slice_
    v_r = _objects(slice_, slice_.nodes)
    v_star = {i for i in oracle_nodes
              if i not in ref or ref.nodes[i].category is Category.OBJECT}
    hit = len(v_r & v_star)
    return GroundingDiagnostics(
        recall=hit / len(v_star) if v_star else None,
        precision=hit / len(v_r) if v_r else None,
    )


def task_recovery(predicted: CompletedStructure | Sequence[GoalAtom],
                  task: TaskInstance) -> float | None:
    """Share of hidden conditions present in the predicted structure.

    For process tasks a constraint counts when both of its atoms appear and
    the earlier one is not placed after the later one.
    """
    atoms = list(getattr(predicted, "atoms", predicted))
    index: dict[GoalAtom, int] = {}
    for k, a in enumerate(atoms):
        index.setdefault(a, k)
    hit = sum(g in index for g in task.hidden_goals)
    total = len(task.hidden_goals)
    if task.is_process_task:
        total += len(task.hidden_constraints)
        hit += sum(c.before in index and c.after in index
                   and index[c.before] <= index[c.after]
                   for c in task.hidden_constraints)
    return hit / total if total else None


def trajectory_recovery(traj: Trajectory, task: TaskInstance,
                        semantics: ProcessSemantics = DEFAULT_SEMANTICS) -> float | None:
    """Task recovery for variants that emit actions instead of goal atoms.

    A goal counts when it holds at some state reached by an action; a
    constraint counts when it holds under the process semantics.
    """
    states = traj.states
    atoms = set(task.hidden_goals)
    atoms.update(a for c in task.hidden_constraints for a in (c.before, c.after))
    reached = SatisfactionTracker(atoms)
    for s in states[1:]:
        reached.observe(s)
    hit = sum(reached.first[g] < INF for g in task.hidden_goals)
    total = len(task.hidden_goals)
    if task.is_process_task:
        total += len(task.hidden_constraints)
        first = first_satisfaction_indices(states, atoms)
        hit += sum(constraint_holds(c, first, states, semantics)
                   for c in task.hidden_constraints)
    return hit / total if total else None


# ---------------------------------------------------------------------------
# tokens

class TokenCounter(Protocol):
    name: str

    def count(self, text: str) -> int: ...


class ApproxTokenizer:
    """Deterministic approximate counter: alphabetic runs, digit groups of at
    most three, and single punctuation characters each count as one token."""

    name = "approx"
    _PATTERN = re.compile(r"[A-Za-z]+|[0-9]{1,3}|\S")

    def count(self, text: str) -> int:
        return sum(1 for _ in self._PATTERN.finditer(text))


# the split pattern used by the common 100k-vocabulary byte-pair encoders
_BPE_SPLIT = (r"""'(?i:[sdmt]|ll|ve|re)|[^\r\n\p{L}\p{N}]?+\p{L}+|\p{N}{1,3}| ?"""
              r"""[^\s\p{L}\p{N}]++[\r\n]*|\s*[\r\n]|\s+(?!\S)|\s+""")


class BpeTokenizer:
    """Byte-pair counter over a ``.tiktoken`` rank file (needs ``tiktoken``)."""

    def __init__(self, path: str):
        try:
            import tiktoken
            from tiktoken.load import load_tiktoken_bpe
        except ImportError as exc:
            raise RuntimeError("bpe tokenizer needs the 'tiktoken' package "
                               "(pip install artifact[bpe])") from exc
        ranks = load_tiktoken_bpe(path)
        self._enc = tiktoken.Encoding(name=f"file:{path}", pat_str=_BPE_SPLIT,
                                      mergeable_ranks=ranks, special_tokens={})
        self.name = f"bpe:{path}"

    def count(self, text: str) -> int:
        return len(self._enc.encode_ordinary(text))


def make_tokenizer(name: str) -> TokenCounter:
    if name == "approx":
        return ApproxTokenizer()
    if name.startswith("bpe:"):
        return BpeTokenizer(name[4:])
    raise ValueError(f"unknown tokenizer {name!r} (expected 'approx' or 'bpe:PATH')")


def token_budget(prompts: Iterable[str], tokenizer: TokenCounter) -> tuple[list[int], int]:
    per_call = [tokenizer.count(p) for p in prompts]
    return per_call, sum(per_call)


# ---------------------------------------------------------------------------
# outcomes

@dataclass(frozen=True)
class EvalOutcome:
    task_id: str
    goal_success: bool
    process_success: bool | None
    failure_class: FailureClass
    recall: float | None = None
    precision: float | None = None
    task_recovery: float | None = None
    tokens: tuple[int, ...] = ()
    environment: str = ""
    detail: str = ""
    transcript: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        fc = FailureClass(self.failure_class)
        object.__setattr__(self, "failure_class", fc)
        ok = self.goal_success and self.process_success is not False
        if (fc is FailureClass.NONE) != ok:
            raise ValueError(f"{self.task_id}: failure class {fc.value} contradicts "
                             f"goal={self.goal_success} process={self.process_success}")
        if fc is FailureClass.PROCESS_FAIL and not self.goal_success:
            raise ValueError(f"{self.task_id}: PROCESS_FAIL needs goals met")
        if fc in (FailureClass.PARSE_FAIL, FailureClass.SIM_FAIL) and self.goal_success:
            raise ValueError(f"{self.task_id}: {fc.value} cannot count as goal success")

    @property
    def passed(self) -> bool:
        return self.failure_class is FailureClass.NONE


def classify(goal_success: bool, process_success: bool | None) -> FailureClass:
    if not goal_success:
        return FailureClass.GOAL_FAIL
    if process_success is False:
        return FailureClass.PROCESS_FAIL
    return FailureClass.NONE
