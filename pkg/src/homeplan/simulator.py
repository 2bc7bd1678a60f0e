"""Deterministic transition system over household scene graphs.

Action semantics (preconditions are checked in the listed order; the first
violated one is reported):

========== ============================================= ==========================
verb       preconditions                                 effects
========== ============================================= ==========================
WALK x     x is not the agent                            agent NEAR edges replaced
                                                         by NEAR x (+ accessible
                                                         children of x); agent moved
                                                         into x's room
GRAB x     GRABBABLE, not held, near, no closed          placement of x replaced by
           container around x, a free hand               HOLDS_RIGHT/HOLDS_LEFT
OPEN x     CAN_OPEN, near, CLOSED                        OPEN; agent NEAR contents
CLOSE x    CAN_OPEN, near, OPEN                          CLOSED
SWITCHON x HAS_SWITCH, near, OFF, PLUGGED_IN if          ON
           HAS_PLUG, CLOSED if CAN_OPEN
SWITCHOFF  HAS_SWITCH, near, ON                          OFF
PUTBACK a b holding a, b != a, b SURFACE, near b         ON_TOP(a, b), NEAR a
PUTIN a b  holding a, b != a, b CONTAINER, near b,       INSIDE(a, b), NEAR a
           OPEN if CAN_OPEN
WIPE x     near x, holding a CLEANING_TOOL               CLEAN
WASH x     holding x, NEAR a WATER_SOURCE                CLEAN
PLUGIN x   HAS_PLUG, near, PLUGGED_OUT                   PLUGGED_IN
PLUGOUT x  HAS_PLUG, near, PLUGGED_IN                    PLUGGED_OUT
========== ============================================= ==========================

"near x" means the agent has a NEAR edge to x or is holding x.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .scene import (HOLDS, Category, Edge, Property, Relation,
                    SceneGraph, State)


class Verb(str, Enum):
    WALK = "WALK"
    GRAB = "GRAB"
    OPEN = "OPEN"
    CLOSE = "CLOSE"
    PUTBACK = "PUTBACK"
    PUTIN = "PUTIN"
    SWITCHON = "SWITCHON"
    SWITCHOFF = "SWITCHOFF"
    WIPE = "WIPE"
    WASH = "WASH"
    PLUGIN = "PLUGIN"
    PLUGOUT = "PLUGOUT"


BINARY_VERBS = frozenset({Verb.PUTBACK, Verb.PUTIN})


class ErrorKind(str, Enum):
    NOT_CLOSE = "NOT_CLOSE"
    NO_FREE_HAND = "NO_FREE_HAND"
    NOT_GRABBABLE = "NOT_GRABBABLE"
    CONTAINER_CLOSED = "CONTAINER_CLOSED"
    NO_SWITCH = "NO_SWITCH"
    NO_PLUG = "NO_PLUG"
    CANNOT_OPEN = "CANNOT_OPEN"
    WRONG_STATE = "WRONG_STATE"
    NOT_SURFACE = "NOT_SURFACE"
    NOT_CONTAINER = "NOT_CONTAINER"
    NO_CLEANING_TOOL = "NO_CLEANING_TOOL"
    NO_WATER_SOURCE = "NO_WATER_SOURCE"
    NOT_HOLDING = "NOT_HOLDING"
    INVALID_TARGET = "INVALID_TARGET"
    NONEXISTENT_NODE = "NONEXISTENT_NODE"


@dataclass(frozen=True)
class Action:
    verb: Verb
    arg1: int
    arg2: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "verb", Verb(self.verb))
        if (self.arg2 is not None) != (self.verb in BINARY_VERBS):
            raise ValueError(f"{self.verb.value} takes "
                             f"{2 if self.verb in BINARY_VERBS else 1} argument(s)")

    @property
    def args(self) -> tuple[int, ...]:
        return (self.arg1,) if self.arg2 is None else (self.arg1, self.arg2)

    def render(self, scene: SceneGraph) -> str:
        """``[VERB] class id`` or ``[VERB] class id class id``."""
        parts = [f"[{self.verb.value}]"]
        for a in self.args:
            node = scene.nodes.get(a)
            parts += [node.class_name if node else "unknown", str(a)]
        return " ".join(parts)

    def __str__(self) -> str:
        return f"[{self.verb.value}] " + " ".join(map(str, self.args))


_ACTION_TEXT = re.compile(r"^\s*\[(\w+)\]\s+(\S+)\s+(-?\d+)(?:\s+(\S+)\s+(-?\d+))?\s*$")


def parse_action_text(text: str) -> Action:
    """Inverse of :meth:`Action.render`."""
    m = _ACTION_TEXT.match(text)
    if not m:
        raise ValueError(f"not an action: {text!r}")
    verb, _, a1, _, a2 = m.groups()
    return Action(Verb(verb.upper()), int(a1), None if a2 is None else int(a2))


@dataclass(frozen=True)
class StepError:
    kind: ErrorKind
    message: str

    def __str__(self) -> str:
        return self.message


class _Fail(Exception):
    def __init__(self, kind: ErrorKind, message: str):
        self.error = StepError(kind, message)


@dataclass(frozen=True)
class Trajectory:
    initial: SceneGraph
    steps: tuple[tuple[Action, SceneGraph], ...] = ()
    failure: tuple[Action, StepError] | None = None

    @property
    def states(self) -> list[SceneGraph]:
        """``S_0 .. S_T``."""
        return [self.initial] + [s for _, s in self.steps]

    @property
    def final(self) -> SceneGraph:
        return self.steps[-1][1] if self.steps else self.initial

    @property
    def actions(self) -> list[Action]:
        return [a for a, _ in self.steps]

    @property
    def failed(self) -> bool:
        return self.failure is not None


def step(scene: SceneGraph, action: Action) -> SceneGraph | StepError:
    """Apply ``action``; return the successor scene or the reason it failed."""
    try:
        return _Step(scene, action).apply()
    except _Fail as f:
        return f.error


def run(scene: SceneGraph, actions: list[Action]) -> Trajectory:
    """Execute ``actions`` in order, stopping at the first failure."""
    steps: list[tuple[Action, SceneGraph]] = []
    cur = scene
    for action in actions:
        nxt = step(cur, action)
        if isinstance(nxt, StepError):
            return Trajectory(scene, tuple(steps), (action, nxt))
        steps.append((action, nxt))
        cur = nxt
    return Trajectory(scene, tuple(steps))


class _Step:
    def __init__(self, scene: SceneGraph, action: Action):
        self.g = scene
        self.a = action
        self.agent = scene.agent_id
        for nid in action.args:
            if nid not in scene:
                raise _Fail(ErrorKind.NONEXISTENT_NODE,
                            f"node {nid} does not exist in the scene")

    def tag(self, nid: int) -> str:
        return self.g.nodes[nid].tag()

    def require(self, ok: bool, kind: ErrorKind, message: str) -> None:
        if not ok:
            raise _Fail(kind, message)

    def require_prop(self, nid: int, prop: Property, kind: ErrorKind, what: str) -> None:
        self.require(prop in self.g.nodes[nid].properties, kind,
                     f"{self.tag(nid)} {what}")

    def require_near(self, nid: int) -> None:
        near = self.g.has_edge(self.agent, Relation.NEAR, nid) or self.g.is_held(nid)
        self.require(near, ErrorKind.NOT_CLOSE,
                     f"{self.tag(self.agent)} is not close to {self.tag(nid)}")

    def require_state(self, nid: int, state: State) -> None:
        self.require(state in self.g.nodes[nid].states, ErrorKind.WRONG_STATE,
                     f"{self.tag(nid)} is not {state.value.lower()}")

    def require_holding(self, nid: int) -> Relation:
        for rel, held in self.g.held().items():
            if held == nid:
                return rel
        raise _Fail(ErrorKind.NOT_HOLDING,
                    f"{self.tag(self.agent)} is not holding {self.tag(nid)}")

    def set_state(self, nid: int, state: State) -> SceneGraph:
        return self.g.replace_node(self.g.nodes[nid].with_state(state))

    def apply(self) -> SceneGraph:
        return getattr(self, "do_" + self.a.verb.value.lower())()

    # -- verbs ------------------------------------------------------------
    def do_walk(self) -> SceneGraph:
        x = self.a.arg1
        g = self.g
        self.require(x != self.agent, ErrorKind.INVALID_TARGET,
                     f"{self.tag(x)} cannot walk to itself")
        remove = [e for e in g.out_edges(self.agent)
                  if e.relation is Relation.NEAR]
        add = []
        target = g.nodes[x]
        if target.category is not Category.ROOM:
            add.append(Edge(self.agent, Relation.NEAR, x))
            add += [Edge(self.agent, Relation.NEAR, c) for c in self._reachable_children(x)]
        room = g.room_of(x)
        cur_room = g.parent(self.agent)
        if room is not None and room != cur_room:
            remove.append(Edge(self.agent, Relation.INSIDE, cur_room))
            add.append(Edge(self.agent, Relation.INSIDE, room))
        return g.with_edges(remove, add)

    def _reachable_children(self, x: int) -> list[int]:
        node = self.g.nodes[x]
        out = self.g.children(x, Relation.ON_TOP)
        if State.OPEN in node.states or Property.CAN_OPEN not in node.properties:
            out += self.g.children(x, Relation.INSIDE)
        return out

    def do_grab(self) -> SceneGraph:
        x = self.a.arg1
        g = self.g
        self.require(g.nodes[x].category is Category.OBJECT, ErrorKind.NOT_GRABBABLE,
                     f"{self.tag(x)} is not grabbable")
        self.require_prop(x, Property.GRABBABLE, ErrorKind.NOT_GRABBABLE, "is not grabbable")
        held = g.held()
        self.require(x not in held.values(), ErrorKind.WRONG_STATE,
                     f"{self.tag(x)} is already held")
        self.require_near(x)
        for c in g.enclosing_containers(x):
            self.require(State.CLOSED not in g.nodes[c].states,
                         ErrorKind.CONTAINER_CLOSED,
                         f"{self.tag(x)} is inside closed {self.tag(c)}")
        free = [h for h in HOLDS if h not in held]
        self.require(bool(free), ErrorKind.NO_FREE_HAND,
                     f"{self.tag(self.agent)} has no free hand")
        old = g.placement_edge(x)
        return g.with_edges([old] if old else [], [Edge(self.agent, free[0], x)])

    def do_open(self) -> SceneGraph:
        x = self.a.arg1
        self.require_prop(x, Property.CAN_OPEN, ErrorKind.CANNOT_OPEN, "cannot be opened")
        self.require_near(x)
        self.require_state(x, State.CLOSED)
        g = self.set_state(x, State.OPEN)
        return g.with_edges(add=[Edge(self.agent, Relation.NEAR, c)
                                 for c in g.children(x, Relation.INSIDE)])

    def do_close(self) -> SceneGraph:
        x = self.a.arg1
        self.require_prop(x, Property.CAN_OPEN, ErrorKind.CANNOT_OPEN, "cannot be closed")
        self.require_near(x)
        self.require_state(x, State.OPEN)
        return self.set_state(x, State.CLOSED)

    def do_switchon(self) -> SceneGraph:
        x = self.a.arg1
        node = self.g.nodes[x]
        self.require_prop(x, Property.HAS_SWITCH, ErrorKind.NO_SWITCH,
                          "does not have a switch")
        self.require_near(x)
        self.require_state(x, State.OFF)
        if Property.HAS_PLUG in node.properties:
            self.require_state(x, State.PLUGGED_IN)
        if Property.CAN_OPEN in node.properties:
            self.require_state(x, State.CLOSED)
        return self.set_state(x, State.ON)

    def do_switchoff(self) -> SceneGraph:
        x = self.a.arg1
        self.require_prop(x, Property.HAS_SWITCH, ErrorKind.NO_SWITCH,
                          "does not have a switch")
        self.require_near(x)
        self.require_state(x, State.ON)
        return self.set_state(x, State.OFF)

    def do_plugin(self) -> SceneGraph:
        x = self.a.arg1
        self.require_prop(x, Property.HAS_PLUG, ErrorKind.NO_PLUG, "does not have a plug")
        self.require_near(x)
        self.require_state(x, State.PLUGGED_OUT)
        return self.set_state(x, State.PLUGGED_IN)

    def do_plugout(self) -> SceneGraph:
        x = self.a.arg1
        self.require_prop(x, Property.HAS_PLUG, ErrorKind.NO_PLUG, "does not have a plug")
        self.require_near(x)
        self.require_state(x, State.PLUGGED_IN)
        return self.set_state(x, State.PLUGGED_OUT)

    def _place(self, prop: Property, kind: ErrorKind, what: str,
               relation: Relation) -> SceneGraph:
        a, b = self.a.arg1, self.a.arg2
        g = self.g
        hand = self.require_holding(a)
        self.require(b != a and a not in g.ancestors(b), ErrorKind.INVALID_TARGET,
                     f"{self.tag(a)} cannot be placed on or in itself")
        self.require_prop(b, prop, kind, what)
        self.require_near(b)
        if relation is Relation.INSIDE and Property.CAN_OPEN in g.nodes[b].properties:
            self.require_state(b, State.OPEN)
        return g.with_edges([Edge(self.agent, hand, a)],
                            [Edge(a, relation, b), Edge(self.agent, Relation.NEAR, a)])

    def do_putback(self) -> SceneGraph:
        return self._place(Property.SURFACE, ErrorKind.NOT_SURFACE,
                           "is not a surface", Relation.ON_TOP)

    def do_putin(self) -> SceneGraph:
        return self._place(Property.CONTAINER, ErrorKind.NOT_CONTAINER,
                           "is not a container", Relation.INSIDE)

    def do_wipe(self) -> SceneGraph:
        x = self.a.arg1
        self.require_near(x)
        tools = [h for h in self.g.held().values()
                 if Property.CLEANING_TOOL in self.g.nodes[h].properties]
        self.require(bool(tools), ErrorKind.NO_CLEANING_TOOL,
                     f"{self.tag(self.agent)} is not holding a cleaning tool")
        return self.set_state(x, State.CLEAN)

    def do_wash(self) -> SceneGraph:
        x = self.a.arg1
        self.require_holding(x)
        water = [e.dst for e in self.g.out_edges(self.agent)
                 if e.relation is Relation.NEAR
                 and Property.WATER_SOURCE in self.g.nodes[e.dst].properties]
        self.require(bool(water), ErrorKind.NO_WATER_SOURCE,
                     f"{self.tag(self.agent)} is not close to a water source")
        return self.set_state(x, State.CLEAN)


def diff_scenes(before: SceneGraph, after: SceneGraph) -> dict:
    """Edge and state changes between two scenes, in a JSON-friendly form."""
    added = sorted(after.edges - before.edges)
    removed = sorted(before.edges - after.edges)
    states = {}
    for nid in sorted(after.nodes):
        old = before.nodes.get(nid)
        new = after.nodes[nid]
        if old is None or old.states != new.states:
            states[str(nid)] = sorted(s.value for s in new.states)
    return {
        "edges_added": [[e.src, e.relation.value, e.dst] for e in added],
        "edges_removed": [[e.src, e.relation.value, e.dst] for e in removed],
        "states_changed": states,
    }


__all__ = ["Verb", "Action", "ErrorKind", "StepError", "Trajectory", "step", "run",
           "parse_action_text", "diff_scenes", "BINARY_VERBS"]
