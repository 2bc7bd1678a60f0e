"""Terse construction of scene graphs for fixtures and tests."""

from __future__ import annotations

from typing import Iterable

from .scene import Category, Edge, Node, Property, Relation, SceneGraph, State


def _states(values: Iterable[str | State]) -> frozenset[State]:
    return frozenset(State(v) for v in values)


def _props(values: Iterable[str | Property]) -> frozenset[Property]:
    return frozenset(Property(v) for v in values)


class SceneBuilder:
    """Accumulates nodes and edges; :meth:`build` validates the result.

    >>> b = SceneBuilder()
    >>> kitchen = b.room(1, "kitchen")
    >>> b.agent(2, kitchen)
    >>> b.obj(3, "table", on=kitchen, props=["SURFACE"])
    3
    """

    def __init__(self) -> None:
        self.nodes: dict[int, Node] = {}
        self.edges: set[Edge] = set()

    def _add(self, node: Node) -> int:
        if node.id in self.nodes:
            raise ValueError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        return node.id

    def room(self, nid: int, name: str) -> int:
        return self._add(Node(nid, name, Category.ROOM))

    def agent(self, nid: int, room: int, name: str = "character") -> int:
        self._add(Node(nid, name, Category.AGENT))
        self.edges.add(Edge(nid, Relation.INSIDE, room))
        return nid

    def obj(self, nid: int, name: str, *, inside: int | None = None,
            on: int | None = None, states: Iterable[str] = (),
            props: Iterable[str] = ()) -> int:
        """An object placed INSIDE ``inside`` or ON_TOP ``on`` (a room counts
        as INSIDE regardless of which keyword names it)."""
        if (inside is None) == (on is None):
            raise ValueError("give exactly one of inside= or on=")
        self._add(Node(nid, name, Category.OBJECT, _states(states), _props(props)))
        parent = inside if inside is not None else on
        rel = Relation.INSIDE
        if on is not None and self.nodes[on].category is not Category.ROOM:
            rel = Relation.ON_TOP
        self.edges.add(Edge(nid, rel, parent))
        return nid

    def held(self, nid: int, name: str, hand: Relation = Relation.HOLDS_RIGHT, *,
             states: Iterable[str] = (), props: Iterable[str] = ("GRABBABLE",)) -> int:
        self._add(Node(nid, name, Category.OBJECT, _states(states), _props(props)))
        agent = next(n.id for n in self.nodes.values() if n.category is Category.AGENT)
        self.edges.add(Edge(agent, hand, nid))
        return nid

    def near(self, a: int, b: int) -> None:
        self.edges.add(Edge(a, Relation.NEAR, b))

    def build(self, validate: bool = True) -> SceneGraph:
        g = SceneGraph(self.nodes, self.edges)
        return g.validate() if validate else g
