"""Seeded random worlds, goal sequences and trajectories shared by the suites."""

from __future__ import annotations

import json
import random
from functools import lru_cache
from importlib import resources

from homeplan.builder import SceneBuilder
from homeplan.scene import (Edge, GoalAtom, ProcessConstraint, Property, Relation, SceneGraph,
                            State, TaskInstance, load_task_bundle, satisfies)
from homeplan.simulator import Action, StepError, Trajectory, Verb, step

DATA = resources.files("homeplan.data")


@lru_cache(maxsize=None)
def sample_tasks() -> tuple[TaskInstance, ...]:
    return tuple(load_task_bundle(DATA.joinpath("sample_tasks.json").read_text()))


@lru_cache(maxsize=None)
def large_tasks() -> tuple[TaskInstance, ...]:
    return tuple(load_task_bundle(DATA.joinpath("large_home.json").read_text()))


def task(task_id: str) -> TaskInstance:
    return next(t for t in sample_tasks() + large_tasks() if t.id == task_id)


def scripted_path() -> str:
    return str(DATA.joinpath("scripted_responses.json"))


def scripted_responses() -> dict[str, str]:
    return json.loads(DATA.joinpath("scripted_responses.json").read_text())


KINDS = [
    ("cup", ["GRABBABLE", "WASHABLE"], [["CLEAN"], ["DIRTY"]]),
    ("book", ["GRABBABLE"], [[]]),
    ("rag", ["GRABBABLE", "CLEANING_TOOL"], [[]]),
    ("table", ["SURFACE"], [["CLEAN"], ["DIRTY"]]),
    ("shelf", ["SURFACE", "CONTAINER"], [[]]),
    ("cabinet", ["CAN_OPEN", "CONTAINER"], [["OPEN"], ["CLOSED"]]),
    ("box", ["CAN_OPEN", "CONTAINER", "GRABBABLE"], [["OPEN"], ["CLOSED"]]),
    ("lamp", ["HAS_SWITCH", "HAS_PLUG"],
     [["ON", "PLUGGED_IN"], ["OFF", "PLUGGED_IN"], ["OFF", "PLUGGED_OUT"]]),
    ("light", ["HAS_SWITCH"], [["ON"], ["OFF"]]),
    ("oven", ["CAN_OPEN", "CONTAINER", "HAS_SWITCH"],
     [["CLOSED", "OFF"], ["OPEN", "OFF"], ["CLOSED", "ON"]]),
    ("faucet", ["WATER_SOURCE"], [[]]),
    ("window", ["CAN_OPEN"], [["OPEN"], ["CLOSED"]]),
    ("mirror", [], [["DIRTY"], []]),
]


def random_world(rng: random.Random, max_nodes: int = 20, held_max: int = 2) -> SceneGraph:
    """A valid scene with 1-3 rooms, one agent and up to ``max_nodes`` nodes."""
    b = SceneBuilder()
    n_rooms = rng.randint(1, 3)
    rooms = [b.room(i + 1, f"room{i}") for i in range(n_rooms)]
    agent = b.agent(n_rooms + 1, rng.choice(rooms))
    nid = agent + 1
    holders: list[tuple[int, str]] = []           # (id, "on" | "inside")
    grabbable: list[int] = []
    budget = max_nodes - n_rooms - 1
    for _ in range(budget):
        name, props, state_choices = rng.choice(KINDS)
        states = rng.choice(state_choices)
        options = [(r, "inside") for r in rooms] + holders
        parent, how = rng.choice(options)
        if how == "on":
            b.obj(nid, name, on=parent, states=states, props=props)
        else:
            b.obj(nid, name, inside=parent, states=states, props=props)
        if "SURFACE" in props:
            holders.append((nid, "on"))
        if "CONTAINER" in props:
            holders.append((nid, "inside"))
        if "GRABBABLE" in props:
            grabbable.append(nid)
        nid += 1
    g = b.build()
    # move up to held_max grabbable leaves into the agent's hands
    leaves = [x for x in grabbable if not g.children(x)]
    rng.shuffle(leaves)
    held = leaves[:rng.randint(0, held_max)]
    if held:
        remove = [g.placement_edge(x) for x in held]
        add = [Edge(agent, hand, x)
               for hand, x in zip((Relation.HOLDS_RIGHT, Relation.HOLDS_LEFT), held)]
        g = g.with_edges(remove=remove, add=add)
    # a few static NEAR edges between objects, and maybe one from the agent
    objs = [n for n in g.nodes if g.nodes[n].category.value == "OBJECT"]
    extra = []
    for _ in range(rng.randint(0, 4)):
        if len(objs) >= 2:
            x, y = rng.sample(objs, 2)
            extra.append(Edge(x, Relation.NEAR, y))
    if objs and rng.random() < 0.5:
        extra.append(Edge(agent, Relation.NEAR, rng.choice(objs)))
    return g.with_edges(add=extra).validate()


def random_atom(rng: random.Random, g: SceneGraph) -> GoalAtom:
    objs = sorted(n for n in g.nodes if g.nodes[n].category.value == "OBJECT")
    if rng.random() < 0.6:
        return GoalAtom(rng.choice(["OPEN", "CLOSED", "CLEAN", "ON", "OFF",
                                    "PLUGGED_IN", "PLUGGED_OUT"]), (rng.choice(objs),))
    a, b = rng.sample(objs, 2) if len(objs) >= 2 else (objs[0], objs[0])
    if a == b:
        return GoalAtom("CLEAN", (a,))
    return GoalAtom(rng.choice(["ON", "INSIDE"]), (a, b))


def plausible_atom(rng: random.Random, g: SceneGraph) -> GoalAtom | None:
    """An atom whose arguments carry the affordances it needs (more compile hits)."""
    def with_prop(p):
        return sorted(n for n, node in g.nodes.items() if p in node.properties)

    grab = with_prop(Property.GRABBABLE)
    choice = rng.randrange(7)
    if choice == 0 and with_prop(Property.CAN_OPEN):
        return GoalAtom(rng.choice(["OPEN", "CLOSED"]), (rng.choice(with_prop(Property.CAN_OPEN)),))
    if choice == 1 and with_prop(Property.HAS_SWITCH):
        return GoalAtom(rng.choice(["ON", "OFF"]), (rng.choice(with_prop(Property.HAS_SWITCH)),))
    if choice == 2 and with_prop(Property.HAS_PLUG):
        return GoalAtom(rng.choice(["PLUGGED_IN", "PLUGGED_OUT"]),
                        (rng.choice(with_prop(Property.HAS_PLUG)),))
    if choice == 3:
        dirty = sorted(n for n, node in g.nodes.items() if State.DIRTY in node.states)
        if dirty:
            return GoalAtom("CLEAN", (rng.choice(dirty),))
    if choice == 4 and grab and with_prop(Property.SURFACE):
        a, b = rng.choice(grab), rng.choice(with_prop(Property.SURFACE))
        if a != b:
            return GoalAtom("ON", (a, b))
    if choice == 5 and grab and with_prop(Property.CONTAINER):
        a, b = rng.choice(grab), rng.choice(with_prop(Property.CONTAINER))
        if a != b:
            return GoalAtom("INSIDE", (a, b))
    if choice == 6:
        return random_atom(rng, g)
    return None


def random_goal_sequence(rng: random.Random, g: SceneGraph, max_len: int = 4) -> list[GoalAtom]:
    out: list[GoalAtom] = []
    for _ in range(rng.randint(0, max_len)):
        atom = plausible_atom(rng, g)
        if atom is not None and atom not in out:
            out.append(atom)
    return out


def random_action(rng: random.Random, g: SceneGraph) -> Action:
    ids = sorted(g.nodes)
    verb = rng.choice(list(Verb))
    if verb in (Verb.PUTBACK, Verb.PUTIN):
        return Action(verb, rng.choice(ids), rng.choice(ids))
    return Action(verb, rng.choice(ids))


def random_trajectory(rng: random.Random, g: SceneGraph, length: int = 12,
                      tries: int = 40) -> Trajectory:
    """Successful steps only: each step retries random actions until one applies."""
    steps = []
    cur = g
    for _ in range(length):
        for _ in range(tries):
            act = random_action(rng, cur)
            nxt = step(cur, act)
            if not isinstance(nxt, StepError):
                steps.append((act, nxt))
                cur = nxt
                break
    return Trajectory(g, tuple(steps))


def random_constraints(rng: random.Random, atoms: list[GoalAtom]) -> list[ProcessConstraint]:
    if len(atoms) < 2:
        return []
    out = []
    for _ in range(rng.randint(1, 3)):
        a, b = rng.sample(atoms, 2)
        out.append(ProcessConstraint(a, b))
    return out


# -- independent oracles ------------------------------------------------------

def brute_force_process(states: list[SceneGraph], goals, constraints) -> bool:
    """Process success by enumerating satisfaction pairs.

    A constraint holds when both conditions are reached somewhere and every
    state reaching the later one is matched by some no-later state reaching
    the earlier one.
    """
    if not all(satisfies(states[-1], g) for g in goals):
        return False
    for c in constraints:
        sat_i = [t for t, s in enumerate(states) if satisfies(s, c.before)]
        sat_j = [t for t, s in enumerate(states) if satisfies(s, c.after)]
        if not sat_i or not sat_j:
            return False
        if not all(any(a <= b for a in sat_i) for b in sat_j):
            return False
    return True


def flat_scene(object_ids) -> SceneGraph:
    """Room 1 holding agent 2 and the given plain objects."""
    b = SceneBuilder()
    b.room(1, "room")
    b.agent(2, 1)
    for i in object_ids:
        b.obj(i, f"thing{i}", inside=1)
    return b.build()


def _goal_task(goals, constraints=(), tag="VG") -> TaskInstance:
    ids = sorted({a for g in goals for a in g.args})
    return TaskInstance("fixture", tag, flat_scene(ids), "", tuple(goals), tuple(constraints))


def _g(pred, *args):
    return GoalAtom(pred, args)


_G4 = [_g("CLEAN", 10), _g("OFF", 11), _g("ON", 12, 13), _g("INSIDE", 14, 13)]
_P = [_g("CLEAN", 10), _g("CLEAN", 11), _g("ON", 10, 11)]
_PC = [ProcessConstraint(_P[0], _P[2]), ProcessConstraint(_P[1], _P[2])]

# (label, slice object ids, oracle ids, expected recall, expected precision)
GROUNDING_FIXTURES = [
    ("identical", [10, 11, 12], {10, 11, 12}, 1.0, 1.0),
    ("three of four in twelve", list(range(10, 22)), {10, 11, 12, 99}, 0.75, 0.25),
    ("disjoint", [10, 11], {20, 21}, 0.0, 0.0),
    ("oracle inside slice", [10, 11, 12, 13, 14], {10, 11}, 1.0, 0.4),
    ("room and agent ignored", [10, 11], {1, 2, 10}, 1.0, 0.5),
    ("empty oracle", [10], set(), None, 0.0),
    ("no objects in slice", [], {10}, 0.0, None),
]

# (label, task, predicted atoms, expected recovery)
RECOVERY_FIXTURES = [
    ("three of four goals", _goal_task(_G4), _G4[:2] + _G4[3:], 0.75),
    ("reversed constraint scores zero for it",
     _goal_task(_P, _PC, "VP"), [_P[0], _P[2], _P[1]], 0.8),
    ("exact process structure", _goal_task(_P, _PC, "VP"), list(_P), 1.0),
]


# (label, raw model output, expected document or None for a parse failure)
PARSE_CASES = [
    ("whole object", '{"goals": []}', {"goals": []}),
    ("whole array", "[1, 2, 3]", [1, 2, 3]),
    ("whole with padding", '\n  {"a": 1}\n\n', {"a": 1}),
    ("nested whole", '{"a": {"b": [1, {"c": 2}]}}', {"a": {"b": [1, {"c": 2}]}}),
    ("unicode", '{"room": "caf\\u00e9"}', {"room": "café"}),
    ("prefix prose", 'Here is my answer: {"goals": []}', {"goals": []}),
    ("suffix prose", '{"goals": []} hope it helps', {"goals": []}),
    ("both sides", 'Sure. {"x": 1} Done.', {"x": 1}),
    ("markdown fence", '```json\n{"node_goals": [], "edge_goals": []}\n```',
     {"node_goals": [], "edge_goals": []}),
    ("array in prose", 'Actions: [["WALK", "sink", 12]] end', [["WALK", "sink", 12]]),
    ("braces in strings", 'note {"text": "a } b { c"} ok', {"text": "a } b { c"}),
    ("escaped quotes", 'x {"q": "say \\"hi\\""} y', {"q": 'say "hi"'}),
    ("bracket noise before", '[see below] {"a": [1, 2]}', {"a": [1, 2]}),
    ("broken then good", '{"a": 1,, } then {"b": 2}', {"b": 2}),
    ("good then broken", '{"b": 2} and then {"a": ', {"b": 2}),
    ("two objects, second longer", '{"a": 1} {"a": 1, "b": 2}', {"a": 1, "b": 2}),
    ("two objects, first longer", '{"a": 1, "b": 2} {"c": 3}', {"a": 1, "b": 2}),
    ("object beats inner array", '{"ids": [1, 2, 3]}', {"ids": [1, 2, 3]}),
    ("array beats objects inside", 'out: [{"a": 1}, {"b": 2}]', [{"a": 1}, {"b": 2}]),
    ("equal spans keep the first", 'A {"a": 1} B {"b": 2}', {"a": 1}),
    ("outer invalid, inner valid", '{"goals": [{"x": 1}], oops}', [{"x": 1}]),
    ("three candidates", '{"a":1} [1,2,3,4,5,6,7] {"bb": 22}', [1, 2, 3, 4, 5, 6, 7]),
    ("trailing comma whole, inner ok", '[{"a": 1},]', {"a": 1}),
    ("empty string", "", None),
    ("prose only", "I cannot help with that", None),
    ("bare string", '"just text"', None),
    ("bare number", "42", None),
    ("unbalanced", '{"goals": [', None),
    ("non-finite constant", '{"a": NaN}', None),
    ("single quotes", "{'a': 1}", None),
]
