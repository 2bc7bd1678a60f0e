"""Household scene graphs, goal atoms, task bundles and the room catalog."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping


class Category(str, Enum):
    ROOM = "ROOM"
    OBJECT = "OBJECT"
    AGENT = "AGENT"


class State(str, Enum):
    OPEN = "OPEN"
    CLOSED = "CLOSED"
    ON = "ON"
    OFF = "OFF"
    CLEAN = "CLEAN"
    DIRTY = "DIRTY"
    PLUGGED_IN = "PLUGGED_IN"
    PLUGGED_OUT = "PLUGGED_OUT"


class Property(str, Enum):
    GRABBABLE = "GRABBABLE"
    CAN_OPEN = "CAN_OPEN"
    HAS_SWITCH = "HAS_SWITCH"
    HAS_PLUG = "HAS_PLUG"
    SURFACE = "SURFACE"
    CONTAINER = "CONTAINER"
    CLEANING_TOOL = "CLEANING_TOOL"
    WATER_SOURCE = "WATER_SOURCE"
    WASHABLE = "WASHABLE"


class Relation(str, Enum):
    INSIDE = "INSIDE"
    ON_TOP = "ON_TOP"
    NEAR = "NEAR"
    HOLDS_LEFT = "HOLDS_LEFT"
    HOLDS_RIGHT = "HOLDS_RIGHT"


HOLDS = (Relation.HOLDS_RIGHT, Relation.HOLDS_LEFT)
PLACEMENT = (Relation.INSIDE, Relation.ON_TOP)

# state pair -> property that licenses it
EXCLUSIVE_GROUPS: tuple[tuple[State, State, Property | None], ...] = (
    (State.OPEN, State.CLOSED, Property.CAN_OPEN),
    (State.ON, State.OFF, Property.HAS_SWITCH),
    (State.CLEAN, State.DIRTY, None),
    (State.PLUGGED_IN, State.PLUGGED_OUT, Property.HAS_PLUG),
)
OPPOSITE: dict[State, State] = {}
for _a, _b, _ in EXCLUSIVE_GROUPS:
    OPPOSITE[_a], OPPOSITE[_b] = _b, _a

NODE_PREDICATES = frozenset(
    {"OPEN", "CLOSED", "CLEAN", "ON", "OFF", "PLUGGED_IN", "PLUGGED_OUT"})
EDGE_PREDICATES = frozenset({"ON", "INSIDE"})


class SceneError(ValueError):
    """Raised for malformed scenes, goals and task bundles."""


class UnknownNodeError(SceneError, KeyError):
    def __init__(self, node_id: Any):
        super().__init__(f"unknown node id {node_id!r}")
        self.node_id = node_id

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class Node:
    id: int
    class_name: str
    category: Category
    states: frozenset[State] = frozenset()
    properties: frozenset[Property] = frozenset()

    def has(self, prop: Property) -> bool:
        return prop in self.properties

    def tag(self) -> str:
        return f"<{self.class_name}>({self.id})"

    def with_state(self, new: State) -> "Node":
        """Return a copy carrying ``new`` and not its exclusive counterpart."""
        states = set(self.states)
        states.discard(OPPOSITE[new])
        states.add(new)
        return Node(self.id, self.class_name, self.category,
                    frozenset(states), self.properties)


class Edge(tuple):
    """Directed relation ``src --relation--> dst``."""

    __slots__ = ()

    def __new__(cls, src: int, relation: Relation, dst: int):
        return tuple.__new__(cls, (src, Relation(relation), dst))

    src = property(lambda self: self[0])
    relation = property(lambda self: self[1])
    dst = property(lambda self: self[2])

    def __repr__(self) -> str:
        return f"Edge({self[0]}, {self[1].value}, {self[2]})"


class SceneGraph:
    """An immutable household scene.

    Mutating helpers (``replace_node``, ``with_edges``) return new graphs.
    Indexes are built lazily and cached on the instance.
    """

    __slots__ = ("_nodes", "_edges", "_out", "_in", "_agent")

    def __init__(self, nodes: Mapping[int, Node] | Iterable[Node],
                 edges: Iterable[Edge] = ()):
        if isinstance(nodes, Mapping):
            self._nodes = dict(nodes)
        else:
            self._nodes = {n.id: n for n in nodes}
        self._edges = frozenset(edges)
        self._out: dict[int, list[Edge]] | None = None
        self._in: dict[int, list[Edge]] | None = None
        self._agent: int | None = None

    # -- basic access -------------------------------------------------
    @property
    def nodes(self) -> Mapping[int, Node]:
        return self._nodes

    @property
    def edges(self) -> frozenset[Edge]:
        return self._edges

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SceneGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((frozenset(self._nodes.items()), self._edges))

    def __repr__(self) -> str:
        return f"SceneGraph({len(self._nodes)} nodes, {len(self._edges)} edges)"

    def node(self, node_id: int) -> Node:
        try:
            return self._nodes[node_id]
        except (KeyError, TypeError):
            raise UnknownNodeError(node_id) from None

    def _index(self) -> None:
        out: dict[int, list[Edge]] = defaultdict(list)
        inc: dict[int, list[Edge]] = defaultdict(list)
        for e in sorted(self._edges):
            out[e.src].append(e)
            inc[e.dst].append(e)
        self._out, self._in = out, inc

    def out_edges(self, node_id: int) -> list[Edge]:
        if self._out is None:
            self._index()
        return self._out.get(node_id, [])

    def in_edges(self, node_id: int) -> list[Edge]:
        if self._in is None:
            self._index()
        return self._in.get(node_id, [])

    @property
    def agent_id(self) -> int:
        if self._agent is None:
            agents = [n.id for n in self._nodes.values()
                      if n.category is Category.AGENT]
            if len(agents) != 1:
                raise SceneError(f"expected exactly one agent, found {len(agents)}")
            self._agent = agents[0]
        return self._agent

    def rooms(self) -> list[Node]:
        return sorted((n for n in self._nodes.values()
                       if n.category is Category.ROOM), key=lambda n: n.id)

    def has_edge(self, src: int, relation: Relation, dst: int) -> bool:
        return Edge(src, relation, dst) in self._edges

    # -- placement tree -----------------------------------------------
    def placement_edge(self, node_id: int) -> Edge | None:
        """The edge that fixes where ``node_id`` is: its parent link."""
        for e in self.out_edges(node_id):
            if e.relation in PLACEMENT:
                return e
        for e in self.in_edges(node_id):
            if e.relation in HOLDS:
                return e
        return None

    def parent(self, node_id: int) -> int | None:
        e = self.placement_edge(node_id)
        if e is None:
            return None
        return e.src if e.relation in HOLDS else e.dst

    def ancestors(self, node_id: int) -> list[int]:
        """Placement ancestors, nearest first. Stops at rooms and on cycles."""
        chain: list[int] = []
        seen = {node_id}
        cur = self.parent(node_id)
        while cur is not None and cur not in seen:
            chain.append(cur)
            seen.add(cur)
            if self._nodes[cur].category is Category.ROOM:
                break
            cur = self.parent(cur)
        return chain

    def room_of(self, node_id: int) -> int | None:
        if self.node(node_id).category is Category.ROOM:
            return node_id
        for anc in self.ancestors(node_id):
            if self._nodes[anc].category is Category.ROOM:
                return anc
        return None

    def held(self) -> dict[Relation, int]:
        return {e.relation: e.dst for e in self.out_edges(self.agent_id)
                if e.relation in HOLDS}

    def is_held(self, node_id: int) -> bool:
        return node_id in self.held().values()

    def children(self, node_id: int, relation: Relation | None = None) -> list[int]:
        return [e.src for e in self.in_edges(node_id)
                if e.relation in PLACEMENT
                and (relation is None or e.relation is relation)]

    def enclosing_containers(self, node_id: int) -> list[int]:
        """Containers holding ``node_id`` through INSIDE links, innermost first."""
        found: list[int] = []
        cur = node_id
        seen = {cur}
        while True:
            e = self.placement_edge(cur)
            if e is None or e.relation in HOLDS:
                return found
            if e.relation is Relation.INSIDE and \
                    self._nodes[e.dst].category is Category.OBJECT:
                found.append(e.dst)
            cur = e.dst
            if cur in seen or self._nodes[cur].category is Category.ROOM:
                return found
            seen.add(cur)

    def hop_distance(self, start: int) -> dict[int, int]:
        """BFS distances over the undirected placement tree.

        Rooms are joined through a virtual house root (id 0), so any two
        rooms are two hops apart.
        """
        adj: dict[int, list[int]] = defaultdict(list)
        for e in self._edges:
            if e.relation is not Relation.NEAR:
                adj[e.src].append(e.dst)
                adj[e.dst].append(e.src)
        for room in self.rooms():
            adj[0].append(room.id)
            adj[room.id].append(0)
        dist = {start: 0}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        dist.pop(0, None)
        return dist

    # -- functional updates -------------------------------------------
    def replace_node(self, node: Node) -> "SceneGraph":
        nodes = dict(self._nodes)
        nodes[node.id] = node
        return SceneGraph(nodes, self._edges)

    def with_edges(self, remove: Iterable[Edge] = (),
                   add: Iterable[Edge] = ()) -> "SceneGraph":
        edges = (set(self._edges) - set(remove)) | set(add)
        g = SceneGraph(self._nodes, edges)
        g._agent = self._agent
        return g

    def subgraph(self, keep: Iterable[int]) -> "SceneGraph":
        """Induced subgraph: every edge whose endpoints both survive."""
        keep = set(keep)
        nodes = {i: n for i, n in self._nodes.items() if i in keep}
        edges = [e for e in self._edges if e.src in keep and e.dst in keep]
        return SceneGraph(nodes, edges)

    # -- validation ---------------------------------------------------
    def problems(self) -> list[str]:
        """Every invariant violation, as human-readable strings."""
        out: list[str] = []
        agents = [n for n in self._nodes.values() if n.category is Category.AGENT]
        if len(agents) != 1:
            out.append(f"expected exactly one AGENT node, found {len(agents)}")
        for nid, node in sorted(self._nodes.items()):
            if not isinstance(nid, int) or isinstance(nid, bool) or nid <= 0:
                out.append(f"node id {nid!r} is not a positive integer")
            for a, b, prop in EXCLUSIVE_GROUPS:
                if a in node.states and b in node.states:
                    out.append(f"{node.tag()} carries both {a.value} and {b.value}")
                if prop is not None and (a in node.states or b in node.states) \
                        and prop not in node.properties:
                    out.append(f"{node.tag()} has {a.value}/{b.value} state "
                               f"without {prop.value}")
        for e in sorted(self._edges):
            for end in (e.src, e.dst):
                if end not in self._nodes:
                    out.append(f"edge {e!r} references missing node {end}")
        if out:
            return out
        agent = agents[0].id
        for rel in HOLDS:
            n = sum(1 for e in self._edges if e.relation is rel)
            if n > 1:
                out.append(f"more than one {rel.value} edge")
        for e in self._edges:
            if e.relation in HOLDS and e.src != agent:
                out.append(f"{e.relation.value} edge from non-agent node {e.src}")
            if e.src == e.dst:
                out.append(f"self-loop {e!r}")
        for nid, node in sorted(self._nodes.items()):
            if node.category is Category.ROOM:
                if any(e.relation in PLACEMENT for e in self.out_edges(nid)):
                    out.append(f"room {node.tag()} has a placement edge")
                continue
            links = [e for e in self.out_edges(nid) if e.relation in PLACEMENT]
            links += [e for e in self.in_edges(nid) if e.relation in HOLDS]
            if node.category is Category.AGENT:
                rooms = [e for e in links if e.relation is Relation.INSIDE and
                         self._nodes[e.dst].category is Category.ROOM]
                if len(links) != 1 or len(rooms) != 1:
                    out.append(f"agent {node.tag()} must be INSIDE exactly one room")
                continue
            if len(links) != 1:
                out.append(f"{node.tag()} has {len(links)} placement edges")
                continue
            chain = self.ancestors(nid)
            if not chain or self._nodes[chain[-1]].category is not Category.ROOM:
                out.append(f"{node.tag()} placement chain does not reach a room")
        return out

    def validate(self) -> "SceneGraph":
        issues = self.problems()
        if issues:
            raise SceneError("; ".join(issues))
        return self

    # -- (de)serialization --------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [node_to_dict(self._nodes[i]) for i in sorted(self._nodes)],
            "edges": [{"from": e.src, "relation": e.relation.value, "to": e.dst}
                      for e in sorted(self._edges)],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], where: str = "scene") -> "SceneGraph":
        if not isinstance(doc, Mapping):
            raise SceneError(f"{where}: expected an object")
        nodes: dict[int, Node] = {}
        for i, raw in enumerate(_list(doc, "nodes", where)):
            node = node_from_dict(raw, f"{where}.nodes[{i}]")
            if node.id in nodes:
                raise SceneError(f"{where}.nodes[{i}]: duplicate node id {node.id}")
            nodes[node.id] = node
        edges = []
        for i, raw in enumerate(_list(doc, "edges", where)):
            at = f"{where}.edges[{i}]"
            if not isinstance(raw, Mapping):
                raise SceneError(f"{at}: expected an object")
            src, dst = _node_id(raw.get("from"), at + ".from"), \
                _node_id(raw.get("to"), at + ".to")
            rel = _enum(Relation, _RELATION_ALIASES.get(raw.get("relation"),
                                                        raw.get("relation")),
                        at + ".relation")
            for end in (src, dst):
                if end not in nodes:
                    raise SceneError(f"{at}: dangling node id {end}")
            edges.append(Edge(src, rel, dst))
        return cls(nodes, edges)


_RELATION_ALIASES = {"ON": "ON_TOP"}


def node_to_dict(node: Node) -> dict[str, Any]:
    return {
        "id": node.id,
        "class_name": node.class_name,
        "category": node.category.value,
        "states": sorted(s.value for s in node.states),
        "properties": sorted(p.value for p in node.properties),
    }


def node_from_dict(raw: Any, where: str) -> Node:
    if not isinstance(raw, Mapping):
        raise SceneError(f"{where}: expected an object")
    nid = _node_id(raw.get("id"), where + ".id")
    cls_name = raw.get("class_name")
    if not isinstance(cls_name, str) or not cls_name:
        raise SceneError(f"{where}.class_name: expected a non-empty string")
    category = _enum(Category, raw.get("category"), where + ".category")
    states = frozenset(_enum(State, s, f"{where}.states")
                       for s in raw.get("states", []))
    props = frozenset(_enum(Property, p, f"{where}.properties")
                      for p in raw.get("properties", []))
    return Node(nid, cls_name, category, states, props)


def _list(doc: Mapping[str, Any], key: str, where: str) -> list:
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise SceneError(f"{where}.{key}: expected a list")
    return value


def _node_id(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise SceneError(f"{where}: node id must be a positive integer, got {value!r}")
    return value


def _enum(kind: type[Enum], value: Any, where: str):
    try:
        return kind(value)
    except ValueError:
        raise SceneError(f"{where}: unknown {kind.__name__.lower()} token {value!r}") from None


# ---------------------------------------------------------------------------
# goals


@dataclass(frozen=True)
class GoalAtom:
    """A unary state goal ``PRED(x)`` or a binary relation goal ``PRED(a, b)``."""

    predicate: str
    args: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        allowed = {1: NODE_PREDICATES, 2: EDGE_PREDICATES}.get(len(self.args))
        if allowed is None:
            raise SceneError(f"goal {self.predicate} must take 1 or 2 arguments")
        if self.predicate not in allowed:
            raise SceneError(
                f"unsupported {'node' if len(self.args) == 1 else 'edge'} "
                f"predicate {self.predicate!r}")

    @property
    def is_unary(self) -> bool:
        return len(self.args) == 1

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(map(str, self.args))})"

    def render(self, scene: SceneGraph) -> str:
        parts = []
        for a in self.args:
            node = scene.nodes.get(a)
            parts.append(f"{node.class_name}.{a}" if node else str(a))
        return f"{self.predicate}({', '.join(parts)})"

    def to_dict(self) -> dict[str, Any]:
        return {"predicate": self.predicate, "args": list(self.args)}

    @classmethod
    def from_dict(cls, raw: Any, where: str = "goal") -> "GoalAtom":
        if not isinstance(raw, Mapping):
            raise SceneError(f"{where}: expected an object")
        args = raw.get("args")
        if not isinstance(args, list):
            raise SceneError(f"{where}.args: expected a list")
        ids = tuple(_node_id(a, f"{where}.args[{i}]") for i, a in enumerate(args))
        try:
            return cls(raw.get("predicate"), ids)
        except SceneError as exc:
            raise SceneError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class ProcessConstraint:
    """``before then after``: ``before`` must be achieved no later than ``after``."""

    before: GoalAtom
    after: GoalAtom

    def __str__(self) -> str:
        return f"{self.before} then {self.after}"

    def to_dict(self) -> dict[str, Any]:
        return {"before": self.before.to_dict(), "after": self.after.to_dict()}


def satisfies(scene: SceneGraph, atom: GoalAtom) -> bool:
    """Whether ``atom`` holds in ``scene``."""
    for a in atom.args:
        scene.node(a)
    if atom.is_unary:
        states = scene.nodes[atom.args[0]].states
        if atom.predicate == "CLEAN":
            return State.CLEAN in states or State.DIRTY not in states
        return State(atom.predicate) in states
    rel = Relation.ON_TOP if atom.predicate == "ON" else Relation.INSIDE
    return scene.has_edge(atom.args[0], rel, atom.args[1])


# ---------------------------------------------------------------------------
# tasks

ENVIRONMENT_TAGS = ("VG", "VP", "BG", "BP")


@dataclass(frozen=True)
class TaskInstance:
    id: str
    environment_tag: str
    scene: SceneGraph
    request: str
    hidden_goals: tuple[GoalAtom, ...] = ()
    hidden_constraints: tuple[ProcessConstraint, ...] = ()
    gt_actions: tuple[str, ...] | None = None

    @property
    def is_process_task(self) -> bool:
        return self.environment_tag in ("VP", "BP")

    @property
    def environment(self) -> str:
        return "VirtualHome" if self.environment_tag[0] == "V" else "BEHAVIOR"

    def public_view(self) -> "PublicTask":
        return PublicTask(self.scene, self.request)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "id": self.id,
            "environment_tag": self.environment_tag,
            "request": self.request,
            "scene": self.scene.to_dict(),
            "hidden_goals": [g.to_dict() for g in self.hidden_goals],
            "hidden_constraints": [c.to_dict() for c in self.hidden_constraints],
        }
        if self.gt_actions is not None:
            doc["gt_actions"] = list(self.gt_actions)
        return doc


@dataclass(frozen=True)
class PublicTask:
    """What prompt builders are allowed to see."""

    scene: SceneGraph
    request: str


def load_task_bundle(document: str | Mapping[str, Any]) -> list[TaskInstance]:
    """Parse and validate a task bundle (JSON text or an already-decoded object)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SceneError(f"bundle is not valid JSON: {exc}") from None
    else:
        doc = document
    if not isinstance(doc, Mapping) or not isinstance(doc.get("tasks", []), list):
        raise SceneError("bundle: expected an object with a 'tasks' list")
    tasks = []
    seen: set[str] = set()
    for i, raw in enumerate(doc.get("tasks", [])):
        task = _load_task(raw, i)
        if task.id in seen:
            raise SceneError(f"task {task.id!r}: duplicate task id")
        seen.add(task.id)
        tasks.append(task)
    return tasks


def _load_task(raw: Any, index: int) -> TaskInstance:
    if not isinstance(raw, Mapping):
        raise SceneError(f"tasks[{index}]: expected an object")
    tid = raw.get("id")
    if not isinstance(tid, str) or not tid:
        raise SceneError(f"tasks[{index}].id: expected a non-empty string")
    at = f"task {tid!r}"
    tag = raw.get("environment_tag")
    if tag not in ENVIRONMENT_TAGS:
        raise SceneError(f"{at}: environment_tag must be one of {ENVIRONMENT_TAGS}")
    request = raw.get("request")
    if not isinstance(request, str):
        raise SceneError(f"{at}: request must be a string")
    try:
        scene = SceneGraph.from_dict(raw.get("scene"), "scene")
        scene.validate()
    except SceneError as exc:
        raise SceneError(f"{at}: {exc}") from None

    def atom(obj: Any, path: str) -> GoalAtom:
        try:
            g = GoalAtom.from_dict(obj, path)
        except SceneError as exc:
            raise SceneError(f"{at}: {exc}") from None
        for a in g.args:
            if a not in scene:
                raise SceneError(f"{at}: {path} references dangling node id {a}")
        return g

    goals = tuple(atom(g, f"hidden_goals[{i}]")
                  for i, g in enumerate(_list(raw, "hidden_goals", at)))
    constraints = []
    for i, c in enumerate(_list(raw, "hidden_constraints", at)):
        path = f"hidden_constraints[{i}]"
        if not isinstance(c, Mapping):
            raise SceneError(f"{at}: {path}: expected an object")
        constraints.append(ProcessConstraint(atom(c.get("before"), path + ".before"),
                                             atom(c.get("after"), path + ".after")))
    if bool(constraints) != (tag in ("VP", "BP")):
        raise SceneError(f"{at}: hidden_constraints must be non-empty exactly "
                         f"for process tasks (VP/BP), got tag {tag}")
    gt = raw.get("gt_actions")
    if gt is not None:
        if not isinstance(gt, list) or not all(isinstance(a, str) for a in gt):
            raise SceneError(f"{at}: gt_actions must be a list of action strings")
        gt = tuple(gt)
    return TaskInstance(tid, tag, scene, request, goals, tuple(constraints), gt)


def dump_task_bundle(tasks: Iterable[TaskInstance], indent: int | None = 1) -> str:
    return json.dumps({"tasks": [t.to_dict() for t in tasks]}, indent=indent)


# ---------------------------------------------------------------------------
# catalog


def render_catalog(scene: SceneGraph) -> str:
    """Room-grouped object inventory: ``class [count] | states | properties``.

    Node ids never appear. Classes within a room are aggregated, with the
    union of their states and properties.
    """
    by_room: dict[int, dict[str, list[Node]]] = {
        r.id: defaultdict(list) for r in scene.rooms()}
    for node in scene.nodes.values():
        if node.category is not Category.OBJECT:
            continue
        room = scene.room_of(node.id)
        if room in by_room:
            by_room[room][node.class_name].append(node)
    lines: list[str] = []
    for room in scene.rooms():
        lines.append(f"ROOM {room.class_name}:")
        for cls_name in sorted(by_room[room.id]):
            group = by_room[room.id][cls_name]
            states = sorted({s.value for n in group for s in n.states})
            props = sorted({p.value for n in group for p in n.properties})
            lines.append(f"{cls_name} [{len(group)}] | {','.join(states) or '-'} | "
                         f"{','.join(props) or '-'}")
    return "\n".join(lines)


def iter_objects(scene: SceneGraph) -> Iterator[Node]:
    for nid in sorted(scene.nodes):
        node = scene.nodes[nid]
        if node.category is Category.OBJECT:
            yield node


__all__ = [
    "Category", "State", "Property", "Relation", "Node", "Edge", "SceneGraph",
    "GoalAtom", "ProcessConstraint", "TaskInstance", "PublicTask", "SceneError",
    "UnknownNodeError", "load_task_bundle", "dump_task_bundle", "render_catalog",
    "satisfies", "NODE_PREDICATES", "EDGE_PREDICATES", "iter_objects",
]
