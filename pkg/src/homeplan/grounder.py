"""Scene grounding: catalog prompt, selection resolution, slice reconstruction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from .client import ParseFailure, recover_structured
from .executor import wash_route
from .prompts import GROUNDING, fill
from .scene import (Category, GoalAtom, Property, PublicTask, SceneGraph, State,
                    TaskInstance, UnknownNodeError, render_catalog)

# A slice is an ordinary scene graph; the name marks where it came from.
SceneSlice = SceneGraph


@dataclass(frozen=True)
class Selection:
    room: str
    objects: tuple[str, ...]
    goal_label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        if not self.objects:
            raise ValueError("a selection names at least one object class")


def build_grounding_prompt(task: PublicTask) -> str:
    return fill(GROUNDING, request=task.request, catalog=render_catalog(task.scene))


def parse_grounding_response(text: str) -> list[Selection]:
    """Selections from a grounding response; malformed entries are skipped."""
    doc = recover_structured(text)
    if not isinstance(doc, dict):
        raise ParseFailure("grounding response is not a JSON object")
    out: list[Selection] = []
    for goal in _as_list(doc.get("goals")):
        if not isinstance(goal, dict):
            continue
        label = goal.get("goal") if isinstance(goal.get("goal"), str) else ""
        for sel in _as_list(goal.get("selections")):
            if not isinstance(sel, dict) or not isinstance(sel.get("room"), str):
                continue
            objs = tuple(o for o in _as_list(sel.get("objects")) if isinstance(o, str))
            if objs:
                out.append(Selection(sel["room"], objs, label))
    return out


def _as_list(value: Any) -> list:
    return value if isinstance(value, list) else []


def resolve_selections(selections: Iterable[Selection], scene: SceneGraph) -> set[int]:
    """Node ids of every object of a selected class in a selected room.

    Unknown rooms and classes match nothing.
    """
    rooms_by_name: dict[str, set[int]] = {}
    for r in scene.rooms():
        rooms_by_name.setdefault(r.class_name, set()).add(r.id)
    all_rooms = {r.id for r in scene.rooms()}
    by_class: dict[str, list[int]] = {}
    for node in scene.nodes.values():
        if node.category is Category.OBJECT:
            by_class.setdefault(node.class_name, []).append(node.id)
    chosen: set[int] = set()
    for sel in selections:
        rooms = all_rooms if sel.room == "any" else rooms_by_name.get(sel.room, set())
        if not rooms:
            continue
        for cls_name in sel.objects:
            for nid in by_class.get(cls_name, ()):
                if scene.room_of(nid) in rooms:
                    chosen.add(nid)
    return chosen


def expand_and_slice(selected: Iterable[int], scene: SceneGraph) -> SceneSlice:
    """Add placement ancestors, the agent and held objects; restore induced edges."""
    keep: set[int] = set()
    for nid in selected:
        if nid not in scene:
            raise UnknownNodeError(nid)
        keep.add(nid)
        keep.update(scene.ancestors(nid))
    agent = scene.agent_id
    keep.add(agent)
    keep.update(scene.ancestors(agent))
    for held in scene.held().values():
        keep.add(held)
    return scene.subgraph(keep)


def _nearest(scene: SceneGraph, origin: int, prop: Property,
             grabbable: bool = False) -> int | None:
    dist = scene.hop_distance(origin)
    cands = [n.id for n in scene.nodes.values()
             if prop in n.properties and n.id != origin and n.id in dist
             and (not grabbable or Property.GRABBABLE in n.properties)]
    if not cands:
        return None
    return min(cands, key=lambda i: (dist[i], i))


def oracle_nodes(task: TaskInstance) -> set[int]:
    """Nodes named by the hidden structure, plus the tool or water source
    needed by each CLEAN goal and by each placement onto a dirty destination
    (which completion turns into a CLEAN goal), nearest to its target."""
    scene = task.scene
    atoms: list[GoalAtom] = list(task.hidden_goals)
    for c in task.hidden_constraints:
        atoms += [c.before, c.after]
    nodes: set[int] = set()
    to_clean: set[int] = set()
    for atom in atoms:
        nodes.update(atom.args)
        if atom.predicate == "CLEAN" and atom.is_unary:
            to_clean.add(atom.args[0])
        elif not atom.is_unary and State.DIRTY in scene.node(atom.args[1]).states:
            to_clean.add(atom.args[1])
    for target in sorted(to_clean):
        if wash_route(scene, target):
            helper = _nearest(scene, target, Property.WATER_SOURCE)
        else:
            helper = _nearest(scene, target, Property.CLEANING_TOOL, grabbable=True)
        if helper is not None:
            nodes.add(helper)
    return nodes


def oracle_slice(task: TaskInstance) -> SceneSlice:
    return expand_and_slice(oracle_nodes(task), task.scene)
