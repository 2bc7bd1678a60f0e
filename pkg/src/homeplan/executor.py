"""Compile ordered goal atoms into grounded, executable skill-level actions.

The executor keeps its own copy of the world and advances it with the
simulator after every emitted action, so each goal is planned against the
state left by the previous ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .scene import Category, GoalAtom, Property, Relation, SceneGraph, State, satisfies
from .simulator import Action, StepError, Verb, step


_PRESTATE = {
    Verb.OPEN: State.CLOSED,
    Verb.CLOSE: State.OPEN,
    Verb.SWITCHOFF: State.ON,
    Verb.PLUGIN: State.PLUGGED_OUT,
    Verb.PLUGOUT: State.PLUGGED_IN,
}


class CompileErrorKind(str, Enum):
    UNREALIZABLE_GOAL = "UNREALIZABLE_GOAL"
    INTERNAL_STEP_FAILURE = "INTERNAL_STEP_FAILURE"


class CompileError(Exception):
    def __init__(self, kind: CompileErrorKind, atom: GoalAtom, reason: str,
                 partial: Sequence[Action] = ()):
        super().__init__(f"{kind.value} for {atom}: {reason}")
        self.kind = kind
        self.atom = atom
        self.reason = reason
        self.partial = list(partial)


@dataclass
class ExecutorState:
    world: SceneGraph
    emitted: list[Action] = field(default_factory=list)


def wash_route(scene: SceneGraph, nid: int) -> bool:
    """Cleaning a grabbable, washable non-surface means washing it; anything
    else is wiped."""
    props = scene.node(nid).properties
    return (Property.GRABBABLE in props and Property.WASHABLE in props
            and Property.SURFACE not in props)


def compile_goals(atoms: Iterable[GoalAtom], world: SceneGraph) -> list[Action]:
    """Actions realizing ``atoms`` in order.

    Raises :class:`CompileError`; its ``partial`` holds the actions compiled
    for the atoms before the failing one.
    """
    atoms = list(getattr(atoms, "atoms", atoms))
    state = ExecutorState(world)
    for k, atom in enumerate(atoms):
        mark = len(state.emitted)
        try:
            realize_goal(atom, state, remaining=atoms[k + 1:])
        except CompileError as exc:
            exc.partial = state.emitted[:mark]
            raise
    return state.emitted


def realize_goal(atom: GoalAtom, state: ExecutorState,
                 remaining: Sequence[GoalAtom] = ()) -> list[Action]:
    """Append (and return) the action block for one atom; no-op if it holds."""
    for a in atom.args:
        state.world.node(a)
    if satisfies(state.world, atom):
        return []
    start = len(state.emitted)
    _Planner(state, atom, remaining).realize()
    return state.emitted[start:]


class _Planner:
    def __init__(self, state: ExecutorState, atom: GoalAtom,
                 remaining: Sequence[GoalAtom]):
        self.state = state
        self.atom = atom
        self.task_nodes = {a for g in (atom, *remaining) for a in g.args}

    @property
    def g(self) -> SceneGraph:
        return self.state.world

    def fail(self, reason: str) -> CompileError:
        return CompileError(CompileErrorKind.UNREALIZABLE_GOAL, self.atom, reason)

    def emit(self, verb: Verb, a: int, b: int | None = None) -> None:
        action = Action(verb, a, b)
        nxt = step(self.g, action)
        if isinstance(nxt, StepError):
            raise CompileError(CompileErrorKind.INTERNAL_STEP_FAILURE, self.atom,
                               f"{action}: {nxt.message}")
        self.state.world = nxt
        self.state.emitted.append(action)

    def has(self, nid: int, prop: Property) -> bool:
        return prop in self.g.nodes[nid].properties

    def is_(self, nid: int, st: State) -> bool:
        return st in self.g.nodes[nid].states

    # -- generic preconditions -----------------------------------------
    def ensure_near(self, nid: int) -> None:
        agent = self.g.agent_id
        if self.g.is_held(nid) or self.g.has_edge(agent, Relation.NEAR, nid):
            return
        self.emit(Verb.WALK, nid)

    def ensure_open(self, nid: int) -> None:
        if self.is_(nid, State.OPEN):
            return
        if not self.is_(nid, State.CLOSED):
            raise self.fail(f"{self.g.nodes[nid].tag()} has no open/closed state")
        self.ensure_near(nid)
        self.emit(Verb.OPEN, nid)

    def acquire(self, nid: int) -> None:
        """Get ``nid`` into a hand."""
        if self.g.is_held(nid):
            return
        if not self.has(nid, Property.GRABBABLE) or \
                self.g.nodes[nid].category is not Category.OBJECT:
            raise self.fail(f"{self.g.nodes[nid].tag()} is not grabbable")
        for c in reversed(self.g.enclosing_containers(nid)):
            if self.is_(c, State.CLOSED):
                self.ensure_open(c)
        self.free_hand(keep=nid)
        self.ensure_near(nid)
        self.emit(Verb.GRAB, nid)

    def free_hand(self, keep: int) -> None:
        held = self.g.held()
        if len(held) < 2:
            return
        # prefer objects no later goal mentions, then the lowest id
        victim = min(held.values(), key=lambda h: (h in self.task_nodes, h))
        dist = self.g.hop_distance(self.g.agent_id)
        blocked = {victim, *self.g.held().values()}
        surfaces = [n.id for n in self.g.nodes.values()
                    if Property.SURFACE in n.properties and n.id not in blocked
                    and victim not in self.g.ancestors(n.id) and n.id in dist]
        if not surfaces:
            raise self.fail(f"both hands are full and no surface is reachable to "
                            f"release {self.g.nodes[victim].tag()}")
        target = min(surfaces, key=lambda s: (dist[s], s))
        self.ensure_near(target)
        self.emit(Verb.PUTBACK, victim, target)

    def nearest(self, prop: Property, exclude: Iterable[int] = (),
                grabbable: bool = False) -> int | None:
        dist = self.g.hop_distance(self.g.agent_id)
        skip = set(exclude)
        cands = [n.id for n in self.g.nodes.values()
                 if prop in n.properties and n.id in dist and n.id not in skip
                 and (not grabbable or Property.GRABBABLE in n.properties)]
        return min(cands, key=lambda i: (dist[i], i)) if cands else None

    # -- goal realizations ---------------------------------------------
    def realize(self) -> None:
        atom = self.atom
        for a in atom.args:
            if self.g.nodes[a].category is not Category.OBJECT:
                raise self.fail(f"{self.g.nodes[a].tag()} is not an object")
        if atom.is_unary:
            getattr(self, "unary_" + atom.predicate.lower())(atom.args[0])
        elif atom.predicate == "ON":
            self.place(*atom.args, Property.SURFACE, Verb.PUTBACK)
        else:
            self.place(*atom.args, Property.CONTAINER, Verb.PUTIN)

    def _require(self, nid: int, prop: Property) -> None:
        if not self.has(nid, prop):
            raise self.fail(f"{self.g.nodes[nid].tag()} lacks {prop.value}")

    def _toggle(self, nid: int, prop: Property, verb: Verb) -> None:
        self._require(nid, prop)
        needed = _PRESTATE[verb]
        if not self.is_(nid, needed):
            raise self.fail(f"{self.g.nodes[nid].tag()} is not {needed.value}")
        self.ensure_near(nid)
        self.emit(verb, nid)

    def unary_open(self, x: int) -> None:
        self._toggle(x, Property.CAN_OPEN, Verb.OPEN)

    def unary_closed(self, x: int) -> None:
        self._toggle(x, Property.CAN_OPEN, Verb.CLOSE)

    def unary_off(self, x: int) -> None:
        self._toggle(x, Property.HAS_SWITCH, Verb.SWITCHOFF)

    def unary_plugged_in(self, x: int) -> None:
        self._toggle(x, Property.HAS_PLUG, Verb.PLUGIN)

    def unary_plugged_out(self, x: int) -> None:
        self._toggle(x, Property.HAS_PLUG, Verb.PLUGOUT)

    def unary_on(self, x: int) -> None:
        self._require(x, Property.HAS_SWITCH)
        if not self.is_(x, State.OFF):
            raise self.fail(f"{self.g.nodes[x].tag()} has no on/off state")
        if self.has(x, Property.CAN_OPEN) and not self.is_(x, State.CLOSED):
            if not self.is_(x, State.OPEN):
                raise self.fail(f"{self.g.nodes[x].tag()} has no open/closed state")
            self.ensure_near(x)
            self.emit(Verb.CLOSE, x)
        if self.has(x, Property.HAS_PLUG) and not self.is_(x, State.PLUGGED_IN):
            if not self.is_(x, State.PLUGGED_OUT):
                raise self.fail(f"{self.g.nodes[x].tag()} has no plug state")
            self.ensure_near(x)
            self.emit(Verb.PLUGIN, x)
        self.ensure_near(x)
        self.emit(Verb.SWITCHON, x)

    def unary_clean(self, x: int) -> None:
        if wash_route(self.g, x):
            if self.nearest(Property.WATER_SOURCE, exclude=[x]) is None:
                raise self.fail("no water source in reach")
            self.acquire(x)
            agent = self.g.agent_id
            if not any(self.has(e.dst, Property.WATER_SOURCE)
                       for e in self.g.out_edges(agent) if e.relation is Relation.NEAR):
                self.emit(Verb.WALK, self.nearest(Property.WATER_SOURCE, exclude=[x]))
            self.emit(Verb.WASH, x)
            return
        held_tools = [h for h in self.g.held().values()
                      if self.has(h, Property.CLEANING_TOOL)]
        if not held_tools:
            tool = self.nearest(Property.CLEANING_TOOL, exclude=[x], grabbable=True)
            if tool is None:
                raise self.fail("no cleaning tool in reach")
            self.acquire(tool)
        self.ensure_near(x)
        self.emit(Verb.WIPE, x)

    def place(self, a: int, b: int, prop: Property, verb: Verb) -> None:
        self._require(b, prop)
        if a == b or a in self.g.ancestors(b):
            raise self.fail(f"{self.g.nodes[b].tag()} is carried by "
                            f"{self.g.nodes[a].tag()}")
        self.acquire(a)
        self.ensure_near(b)
        if verb is Verb.PUTIN and self.has(b, Property.CAN_OPEN):
            self.ensure_open(b)
        self.emit(verb, a, b)

