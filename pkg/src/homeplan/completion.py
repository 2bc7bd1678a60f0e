"""Rule-based completion of inferred goal sequences with household priors."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Any, Iterable, Sequence

from .scene import (EDGE_PREDICATES, NODE_PREDICATES, GoalAtom, Property, SceneGraph,
                    State)

BEFORE = "BEFORE_TRIGGER"
AFTER = "AFTER_TRIGGER"
INFERRED = "INFERRED"
MAX_PASSES = 10


class RuleError(ValueError):
    pass


class CompletionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ArgTest:
    arg: int
    property: Property | None = None
    state: State | None = None

    def holds(self, scene: SceneGraph, atom: GoalAtom) -> bool:
        node = scene.nodes.get(atom.args[self.arg])
        if node is None:
            return False
        if self.property is not None:
            return self.property in node.properties
        return self.state in node.states


@dataclass(frozen=True)
class CompletionRule:
    id: str
    predicates: tuple[str, ...]
    arity: int
    tests: tuple[ArgTest, ...]
    insert_predicate: str
    bind: tuple[int, ...]
    placement: str

    def matches(self, atom: GoalAtom, scene: SceneGraph) -> bool:
        return (atom.predicate in self.predicates and len(atom.args) == self.arity
                and all(t.holds(scene, atom) for t in self.tests))

    def instantiate(self, atom: GoalAtom) -> GoalAtom:
        return GoalAtom(self.insert_predicate, tuple(atom.args[i] for i in self.bind))


@dataclass(frozen=True)
class CompletedStructure:
    atoms: tuple[GoalAtom, ...]
    provenance: tuple[str, ...]

    @classmethod
    def from_atoms(cls, atoms: Iterable[GoalAtom]) -> "CompletedStructure":
        atoms = tuple(atoms)
        return cls(atoms, (INFERRED,) * len(atoms))


def _arg_test(raw: Any, arity: int, where: str) -> ArgTest:
    if not isinstance(raw, dict):
        raise RuleError(f"{where}: expected an object")
    arg = raw.get("arg")
    if not isinstance(arg, int) or not 0 <= arg < arity:
        raise RuleError(f"{where}.arg: must index a trigger argument (0..{arity - 1})")
    try:
        if "property" in raw:
            return ArgTest(arg, property=Property(raw["property"]))
        if "state" in raw:
            return ArgTest(arg, state=State(raw["state"]))
    except ValueError as exc:
        raise RuleError(f"{where}: {exc}") from None
    raise RuleError(f"{where}: needs 'property' or 'state'")


def _rule(raw: Any, index: int) -> CompletionRule:
    where = f"rules[{index}]"
    if not isinstance(raw, dict) or not isinstance(raw.get("id"), str):
        raise RuleError(f"{where}: expected an object with a string id")
    where = f"rule {raw['id']!r}"
    trig = raw.get("trigger")
    if not isinstance(trig, dict):
        raise RuleError(f"{where}.trigger: expected an object")
    arity = trig.get("arity")
    if arity not in (1, 2):
        raise RuleError(f"{where}.trigger.arity: must be 1 or 2")
    preds = trig.get("predicate")
    preds = (preds,) if isinstance(preds, str) else tuple(preds or ())
    allowed = NODE_PREDICATES if arity == 1 else EDGE_PREDICATES
    if not preds or any(p not in allowed for p in preds):
        raise RuleError(f"{where}.trigger.predicate: unsupported for arity {arity}")
    tests = []
    for key in ("arg_property", "arg_state"):
        if key in trig:
            tests.append(_arg_test(trig[key], arity, f"{where}.trigger.{key}"))
    if "condition" in raw:
        tests.append(_arg_test(raw["condition"], arity, f"{where}.condition"))
    ins = raw.get("insert")
    if not isinstance(ins, dict) or not isinstance(ins.get("bind"), list):
        raise RuleError(f"{where}.insert: expected {{predicate, bind}}")
    bind = tuple(ins["bind"])
    for b in bind:
        if not isinstance(b, int) or not 0 <= b < arity:
            raise RuleError(f"{where}.insert.bind: argument {b!r} is not bound by the trigger")
    ins_allowed = {1: NODE_PREDICATES, 2: EDGE_PREDICATES}.get(len(bind), frozenset())
    if ins.get("predicate") not in ins_allowed:
        raise RuleError(f"{where}.insert.predicate: unsupported for {len(bind)} argument(s)")
    placement = raw.get("placement")
    if placement not in (BEFORE, AFTER):
        raise RuleError(f"{where}.placement: must be {BEFORE} or {AFTER}")
    return CompletionRule(raw["id"], preds, arity, tuple(tests), ins["predicate"],
                          bind, placement)


def load_rules(document: str | dict) -> list[CompletionRule]:
    doc = json.loads(document) if isinstance(document, (str, bytes)) else document
    if not isinstance(doc, dict) or not isinstance(doc.get("rules", []), list):
        raise RuleError("rule document: expected an object with a 'rules' list")
    rules = [_rule(r, i) for i, r in enumerate(doc.get("rules", []))]
    ids = [r.id for r in rules]
    if len(set(ids)) != len(ids):
        raise RuleError("rule document: duplicate rule ids")
    return rules


def default_rules() -> list[CompletionRule]:
    text = resources.files("homeplan.data").joinpath("default_rules.json").read_text()
    return load_rules(text)


def complete(goals: Sequence[GoalAtom], slice_: SceneGraph,
             rules: Sequence[CompletionRule]) -> CompletedStructure:
    """Insert rule-implied goals until nothing changes.

    Atoms are scanned in order; a rule firing on atom ``i`` inserts its
    instantiated goal right before or right after ``i``, unless an equal atom
    is already anywhere in the sequence. Conditions are read from the slice's
    initial state.
    """
    atoms = list(getattr(goals, "atoms", goals))
    prov = [INFERRED] * len(atoms)
    for _ in range(MAX_PASSES):
        changed = False
        i = 0
        while i < len(atoms):
            atom = atoms[i]
            for rule in rules:
                if not rule.matches(atom, slice_):
                    continue
                new = rule.instantiate(atom)
                if new in atoms:
                    continue
                at = i if rule.placement == BEFORE else i + 1
                atoms.insert(at, new)
                prov.insert(at, rule.id)
                changed = True
                if at <= i:
                    i += 1
            i += 1
        if not changed:
            return CompletedStructure(tuple(atoms), tuple(prov))
    raise CompletionError(f"no fixed point after {MAX_PASSES} passes; "
                          "the rule set keeps inserting goals")
