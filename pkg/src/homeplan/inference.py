"""Goal-structure inference prompt and response parsing."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .client import ParseFailure, recover_structured
from .prompts import INFERENCE, ORDERING_HINT, fill, render_edges, render_nodes
from .scene import (EDGE_PREDICATES, NODE_PREDICATES, GoalAtom, Property, PublicTask,
                    SceneGraph, satisfies)


class DropReason(str, Enum):
    MALFORMED = "MALFORMED"
    UNSUPPORTED_PREDICATE = "UNSUPPORTED_PREDICATE"
    NONEXISTENT_ENTITY = "NONEXISTENT_ENTITY"
    DUPLICATE = "DUPLICATE"
    ALREADY_SATISFIED = "ALREADY_SATISFIED"
    AFFORDANCE_MISMATCH = "AFFORDANCE_MISMATCH"


@dataclass(frozen=True)
class DroppedGoal:
    entry: Any
    reason: DropReason


@dataclass(frozen=True)
class GoalSequence:
    atoms: tuple[GoalAtom, ...]
    dropped: tuple[DroppedGoal, ...] = field(default=(), compare=False)


def build_inference_prompt(task: PublicTask, slice_: SceneGraph,
                           with_ordering_hint: bool = True) -> str:
    prompt = fill(INFERENCE, request=task.request,
                  nodes=render_nodes(slice_), edges=render_edges(slice_))
    if with_ordering_hint:
        prompt += "\n\n" + ORDERING_HINT
    return prompt


_EDGE_KEYS = (("from", "to"), ("from_id", "to_id"), ("subject", "object"))


def _normalize(entry: Any) -> tuple[str, list] | None:
    """(predicate, args) from the accepted entry shapes, or None."""
    if not isinstance(entry, dict):
        return None
    if "predicate" in entry and "args" in entry:
        pred, args = entry["predicate"], entry["args"]
    elif "state" in entry and ("id" in entry or "node" in entry):
        pred, args = entry["state"], [entry.get("id", entry.get("node"))]
    elif "relation" in entry:
        for a, b in _EDGE_KEYS:
            if a in entry and b in entry:
                pred, args = entry["relation"], [entry[a], entry[b]]
                break
        else:
            return None
    else:
        return None
    if not isinstance(pred, str) or not isinstance(args, list):
        return None
    return pred.strip().upper(), args


def _order_key(entry: Any) -> float:
    if isinstance(entry, dict):
        order = entry.get("order")
        if isinstance(order, int) and not isinstance(order, bool):
            return order
    return float("inf")


def parse_goal_structure(response: str, slice_: SceneGraph) -> GoalSequence:
    """Validated ordered goals from an inference response.

    Raises :class:`ParseFailure` only when no JSON object is recoverable.
    Invalid entries are dropped one by one and reported in ``dropped``.
    """
    doc = recover_structured(response)
    entries: list[Any] = []
    if isinstance(doc, dict):
        for key in ("node_goals", "edge_goals", "goals"):
            value = doc.get(key)
            if isinstance(value, list):
                entries.extend(value)
    elif isinstance(doc, list):
        entries = list(doc)
    else:
        raise ParseFailure("inference response is not a JSON object")

    # entries carrying an integer "order" come first, sorted by it; the sort
    # key depends only on the entry itself so dropping one never reorders others
    ranked = sorted(enumerate(entries), key=lambda p: (_order_key(p[1]), p[0]))
    atoms: list[GoalAtom] = []
    dropped: list[DroppedGoal] = []
    seen: set[GoalAtom] = set()
    for _, entry in ranked:
        atom, reason = _validate(entry, slice_)
        if atom is not None and atom in seen:
            reason = DropReason.DUPLICATE
        if reason is not None:
            dropped.append(DroppedGoal(entry, reason))
            continue
        seen.add(atom)
        atoms.append(atom)
    return GoalSequence(tuple(atoms), tuple(dropped))


def _validate(entry: Any, slice_: SceneGraph) -> tuple[GoalAtom | None, DropReason | None]:
    norm = _normalize(entry)
    if norm is None:
        return None, DropReason.MALFORMED
    pred, args = norm
    if not args or not all(isinstance(a, int) and not isinstance(a, bool) for a in args) \
            or len(set(args)) != len(args):
        return None, DropReason.MALFORMED
    allowed = {1: NODE_PREDICATES, 2: EDGE_PREDICATES}.get(len(args))
    if allowed is None or pred not in allowed:
        return None, DropReason.UNSUPPORTED_PREDICATE
    if any(a not in slice_ for a in args):
        return None, DropReason.NONEXISTENT_ENTITY
    atom = GoalAtom(pred, tuple(args))
    if pred in ("ON", "OFF") and atom.is_unary and \
            Property.HAS_SWITCH not in slice_.nodes[args[0]].properties:
        return None, DropReason.AFFORDANCE_MISMATCH
    if satisfies(slice_, atom):
        return None, DropReason.ALREADY_SATISFIED
    return atom, None
