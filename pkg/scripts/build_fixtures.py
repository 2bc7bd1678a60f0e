#!/usr/bin/env python3
"""Regenerate the bundled task fixtures and scripted model responses.

Outputs (all deterministic):
  src/homeplan/data/sample_tasks.json      hand-authored tasks on two homes
  src/homeplan/data/large_home.json        tasks on a ~300-node home
  src/homeplan/data/scripted_responses.json
  tests/fixtures/broken_bundle.json        teaser task missing one goal's actions

gt_actions come from the model-free oracle path (completion + executor).
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from homeplan.builder import SceneBuilder
from homeplan.client import prompt_digest
from homeplan.completion import complete, default_rules
from homeplan.executor import compile_goals
from homeplan.grounder import oracle_nodes
from homeplan.prompts import action_prompt
from homeplan.scene import (GoalAtom, ProcessConstraint, Property, Relation, SceneGraph,
                            TaskInstance, dump_task_bundle)

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "src" / "homeplan" / "data"
FIXTURES = ROOT / "tests" / "fixtures"

G = ["GRABBABLE"]
CUP = ["GRABBABLE", "WASHABLE"]
TOOL = ["GRABBABLE", "CLEANING_TOOL"]
SURF = ["SURFACE"]
BOX = ["CAN_OPEN", "CONTAINER"]
APPLIANCE = ["CAN_OPEN", "CONTAINER", "HAS_SWITCH", "HAS_PLUG"]


def A(pred: str, *args: int) -> GoalAtom:
    return GoalAtom(pred, args)


def then(a: GoalAtom, b: GoalAtom) -> ProcessConstraint:
    return ProcessConstraint(a, b)


# ---------------------------------------------------------------------------
# home A: four rooms, ids follow the case-study transcripts

def home_a(agent_room: int = 73, holding: tuple[int, ...] = ()) -> SceneGraph:
    b = SceneBuilder()
    bath, bed, dining, office = (b.room(11, "bathroom"), b.room(73, "bedroom"),
                                 b.room(201, "dining_room"), b.room(319, "home_office"))
    b.agent(65, agent_room)

    b.obj(12, "sink", inside=bath, props=["CONTAINER"])
    b.obj(13, "faucet", inside=bath, props=["WATER_SOURCE"])
    b.obj(15, "towel_rack", inside=bath, props=SURF)
    b.obj(14, "towel", on=15, props=CUP)
    b.obj(16, "toilet", inside=bath)
    b.obj(17, "bathroom_cabinet", inside=bath, states=["CLOSED"], props=BOX)
    b.obj(18, "toothbrush", inside=17, props=CUP)
    b.obj(19, "light", inside=bath, states=["ON"], props=["HAS_SWITCH"])

    b.obj(74, "bed", inside=bed, props=SURF)
    b.obj(75, "nightstand", inside=bed, props=SURF)
    b.obj(96, "ceilinglamp", inside=bed)
    b.obj(97, "tablelamp", on=75, states=["ON"], props=["HAS_SWITCH"])
    b.obj(99, "dresser", inside=bed, props=SURF)
    b.obj(98, "tablelamp", on=99, states=["ON", "PLUGGED_IN"],
          props=["HAS_SWITCH", "HAS_PLUG"])
    b.obj(169, "light", inside=bed, states=["ON"], props=["HAS_SWITCH"])
    if 100 not in holding:
        b.obj(100, "book", on=74, props=G)
    b.obj(101, "pillow", on=74, props=G)
    b.obj(102, "closet", inside=bed, states=["OPEN"], props=BOX)
    b.obj(103, "clothes_shirt", on=74, states=["DIRTY"], props=CUP)

    b.obj(226, "table", inside=dining, states=["DIRTY"], props=SURF)
    b.obj(230, "kitchen_counter", inside=dining, states=["DIRTY"], props=SURF)
    b.obj(245, "light", inside=dining, states=["ON"], props=["HAS_SWITCH"])
    b.obj(247, "sink", inside=dining, props=["CONTAINER"])
    b.obj(248, "faucet", inside=dining, props=["WATER_SOURCE"])
    b.obj(289, "freezer", inside=dining, states=["CLOSED"], props=BOX)
    b.obj(290, "fridge", inside=dining, states=["CLOSED", "ON", "PLUGGED_IN"],
          props=APPLIANCE)
    b.obj(291, "dishwasher", inside=dining, states=["CLOSED", "OFF", "PLUGGED_IN"],
          props=APPLIANCE)
    b.obj(292, "microwave", on=230, states=["CLOSED", "OFF", "PLUGGED_OUT"],
          props=APPLIANCE)
    b.obj(293, "coffeemaker", on=230, states=["OFF", "PLUGGED_OUT"],
          props=["HAS_SWITCH", "HAS_PLUG", "CONTAINER"])
    b.obj(294, "kitchen_cabinet", inside=dining, states=["CLOSED"], props=BOX)
    b.obj(295, "plate", inside=294, states=["CLEAN"], props=CUP)
    b.obj(296, "mug", on=230, states=["DIRTY"], props=CUP)
    b.obj(297, "bowl", on=226, states=["DIRTY"], props=CUP)
    b.obj(298, "chair", inside=dining)
    b.obj(299, "toaster", on=230, states=["OFF", "PLUGGED_IN"],
          props=["HAS_SWITCH", "HAS_PLUG"])
    b.obj(2009, "cup", on=226, states=["DIRTY"], props=CUP)
    b.obj(3000, "food_bread", inside=289, props=G)
    b.obj(3001, "rag", on=230, props=TOOL)
    b.obj(3002, "food_apple", inside=290, props=G)

    b.obj(352, "couch", inside=office, props=SURF)
    b.obj(355, "table", inside=office, states=["DIRTY"], props=SURF)
    b.obj(410, "television", inside=office, states=["ON", "PLUGGED_IN"],
          props=["HAS_SWITCH", "HAS_PLUG"])
    b.obj(418, "desk", inside=office, props=SURF)
    b.obj(417, "computer", on=418, states=["ON"], props=["HAS_SWITCH"])
    b.obj(420, "window", inside=office, states=["OPEN"], props=["CAN_OPEN"])
    b.obj(2010, "cup", on=418, states=["DIRTY"], props=CUP)
    if 421 not in holding:
        b.obj(421, "cellphone", on=352, props=G)
    b.obj(422, "bookshelf", inside=office, props=SURF + ["CONTAINER"])
    b.obj(423, "keyboard", on=418, props=G)
    b.obj(424, "mouse", on=418, props=G)
    b.obj(425, "floor_lamp", inside=office, states=["OFF"], props=["HAS_SWITCH"])

    hands = iter([Relation.HOLDS_RIGHT, Relation.HOLDS_LEFT])
    names = {100: "book", 421: "cellphone"}
    for nid in holding:
        b.held(nid, names[nid], next(hands))
    # static proximity, as exported scene graphs carry it
    for x, y in [(226, 298), (230, 247), (247, 248), (12, 13), (352, 355),
                 (74, 75), (418, 425)]:
        b.near(x, y)
        b.near(y, x)
    return b.build()


# ---------------------------------------------------------------------------
# home B: a BEHAVIOR-style apartment

def home_b() -> SceneGraph:
    b = SceneBuilder()
    kitchen, living, bath, garage = (b.room(501, "kitchen"), b.room(502, "living_room"),
                                     b.room(503, "bathroom"), b.room(504, "garage"))
    b.agent(500, living)

    b.obj(510, "countertop", inside=kitchen, states=["DIRTY"], props=SURF)
    b.obj(511, "sink", inside=kitchen, props=["CONTAINER"])
    b.obj(512, "faucet", inside=kitchen, props=["WATER_SOURCE"])
    b.obj(513, "cabinet", inside=kitchen, states=["CLOSED"], props=BOX)
    b.obj(514, "bowl", inside=513, states=["DIRTY"], props=CUP)
    b.obj(515, "plate", inside=513, states=["CLEAN"], props=CUP)
    b.obj(516, "sponge", on=510, props=TOOL + ["WASHABLE"])
    b.obj(517, "fridge", inside=kitchen, states=["CLOSED", "ON", "PLUGGED_IN"],
          props=APPLIANCE)
    b.obj(518, "milk", inside=517, props=G)
    b.obj(519, "oven", inside=kitchen, states=["CLOSED", "OFF"],
          props=["CAN_OPEN", "CONTAINER", "HAS_SWITCH"])
    b.obj(520, "casserole", on=510, props=G)

    b.obj(530, "coffee_table", inside=living, states=["DIRTY"], props=SURF)
    b.obj(531, "sofa", inside=living, props=SURF)
    b.obj(533, "side_table", inside=living, props=SURF)
    b.obj(532, "lamp", on=533, states=["OFF", "PLUGGED_OUT"],
          props=["HAS_SWITCH", "HAS_PLUG"])
    b.obj(534, "tv", inside=living, states=["ON"], props=["HAS_SWITCH"])
    b.obj(535, "remote_control", on=531, props=G)
    b.obj(536, "laptop", on=530, states=["ON", "PLUGGED_IN"],
          props=["HAS_SWITCH", "HAS_PLUG", "GRABBABLE"])
    b.obj(537, "box", inside=living, states=["OPEN"], props=BOX + G)
    b.obj(538, "book", on=530, props=G)

    b.obj(540, "bathtub", inside=bath, props=["CONTAINER"])
    b.obj(542, "towel_rack", inside=bath, props=SURF)
    b.obj(541, "towel", on=542, states=["DIRTY"], props=TOOL + ["WASHABLE"])
    b.obj(543, "soap", on=542, props=G)
    b.obj(544, "mirror", inside=bath, states=["DIRTY"])
    b.obj(545, "shelf", inside=bath, props=SURF)
    b.obj(546, "faucet", inside=bath, props=["WATER_SOURCE"])

    b.obj(550, "toolbox", inside=garage, states=["CLOSED"], props=BOX + G)
    b.obj(551, "car", inside=garage)
    b.obj(552, "workbench", inside=garage, states=["DIRTY"], props=SURF)
    b.obj(553, "rag", on=552, props=TOOL)
    b.obj(554, "hammer", inside=550, props=G)
    b.obj(555, "bucket", inside=garage, props=["CONTAINER", "GRABBABLE"])
    b.obj(556, "washer", inside=garage, states=["CLOSED", "OFF", "PLUGGED_IN"],
          props=APPLIANCE)
    b.obj(558, "laundry_basket", inside=garage, props=["CONTAINER"])
    b.obj(557, "shirt", inside=558, states=["DIRTY"], props=CUP)
    for x, y in [(510, 511), (511, 512), (530, 531), (552, 553)]:
        b.near(x, y)
        b.near(y, x)
    return b.build()


# ---------------------------------------------------------------------------
# task specs: (id, tag, scene, request, goals, constraints, flaws)
#
# flaws shape the scripted "model" responses:
#   infer_omit   hidden goals left out of the inference response
#   infer_extra  extra (possibly invalid) goal entries appended
#   act          a replacement action list for the direct-action stage
#   naive_act    a response used only for the full-scene action prompt
#   infer_wrap   wrap the inference JSON in prose

def sample_specs() -> list[dict]:
    a, a_office = home_a(), home_a(agent_room=319)
    a_full = home_a(agent_room=319, holding=(100, 421))
    hb = home_b()
    specs = []

    def add(tid, tag, scene, request, goals, constraints=(), **flaws):
        specs.append(dict(id=tid, tag=tag, scene=scene, request=request,
                          goals=list(goals), constraints=list(constraints), flaws=flaws))

    teaser = [A("CLOSED", 420), A("CLEAN", 355), A("CLEAN", 2010), A("ON", 2010, 355)]
    add("vp_teaser_office", "VP", a_office,
        "Rain is coming into my office and someone is going to call me soon. "
        "Could you get the room ready so I can sit down with a drink at the little table?",
        teaser, [then(teaser[0], teaser[1]), then(teaser[1], teaser[3]),
                 then(teaser[2], teaser[3])])
    dw = [A("INSIDE", 296, 291), A("CLOSED", 291), A("ON", 291)]
    add("vp_dishwasher_mug", "VP", a,
        "Get that dirty mug on the counter washed in the dishwasher.",
        dw, [then(dw[0], dw[2]), then(dw[1], dw[2])], infer_omit=[dw[1]])
    add("vg066_bread_couch", "VG", a,
        "I'm camping on the office couch for the afternoon. Bring me the bread so it "
        "sits right there with me, clean up the grimy table next to the couch and make "
        "sure the TV stays off.",
        [A("ON", 3000, 352), A("CLEAN", 355), A("OFF", 410)],
        naive_act=[["WALK", "dining_area", "dining_area_id"], ["FIND", "bread", "bread_id"],
                   ["GRAB", "bread", "bread_id"], ["WALK", "office_couch", "office_couch_id"]],
        act=[["WALK", "dining_room", 201], ["GRAB", "food_bread", 3000],
             ["WALK", "home_office", 319], ["PUTBACK", "food_bread", 3000, "couch", 352],
             ["SWITCHOFF", "television", 410]])
    add("vg016_lights_out", "VG", a,
        "Bedtime. Make the house dark and quiet, no screens on anywhere.",
        [A("OFF", 97), A("OFF", 98), A("OFF", 169), A("OFF", 245), A("OFF", 410),
         A("OFF", 417)],
        infer_extra=[{"id": 96, "state": "OFF"}],
        act=[["WALK", "ceilinglamp", 96], ["SWITCHOFF", "ceilinglamp", 96]])
    add("vg133_lunch_prep", "VG", a,
        "I'm about to make a sandwich at the counter and have a glass of water at the "
        "dining table. Please get that area ready.",
        [A("CLEAN", 226), A("CLEAN", 230), A("CLEAN", 2009)],
        act=[["WALK", "rag", 3001], ["GRAB", "rag", 3001],
             ["WALK", "kitchen_counter", 230], ["WIPE", "kitchen_counter", 230],
             ["WALK", "table", 226], ["WIPE", "table", 226]])
    add("vg_microwave_on", "VG", a, "Start the microwave for me.", [A("ON", 292)])
    add("vg_coffee_ready", "VG", a, "I'd like the coffee maker running.",
        [A("PLUGGED_IN", 293), A("ON", 293)], infer_omit=[A("PLUGGED_IN", 293)])
    plate = [A("CLEAN", 226), A("ON", 295, 226)]
    add("vp_plate_on_table", "VP", a, "Set a plate out on the dining table.",
        plate, [then(plate[0], plate[1])], infer_omit=[plate[0]])
    add("vg_bedtime_reading", "VG", a,
        "Put my book on the nightstand and turn off the big bedroom light.",
        [A("ON", 100, 75), A("OFF", 169)], infer_wrap=True)
    shirt = [A("CLEAN", 103), A("INSIDE", 103, 102), A("CLOSED", 102)]
    add("vp_shirt_away", "VP", a,
        "That shirt on the bed is dirty. Wash it, hang it in the closet and shut the closet.",
        shirt, [then(shirt[0], shirt[1]), then(shirt[1], shirt[2])])
    add("vg_bathroom_refresh", "VG", a,
        "The bathroom sink is gross, clean it and turn off the light in there.",
        [A("CLEAN", 12), A("OFF", 19)])
    add("vg_bread_to_fridge", "VG", a,
        "Move the bread from the freezer to the fridge and leave both shut.",
        [A("INSIDE", 3000, 290), A("CLOSED", 290), A("CLOSED", 289)])
    cup = [A("CLEAN", 2009), A("ON", 2009, 418)]
    add("vp_cup_to_desk", "VP", a,
        "Bring me a clean cup at my desk, the one on the dining table is dirty.",
        cup, [then(cup[0], cup[1])])
    add("vg_hands_full_sink", "VG", a_full,
        "Drop the cup from my desk into the kitchen sink.",
        [A("INSIDE", 2010, 247)])

    add("bg_lamp_on", "BG", hb, "Turn on the lamp by the side table.", [A("ON", 532)])
    bowl = [A("CLEAN", 510), A("CLEAN", 514), A("ON", 514, 510)]
    add("bp_bowl_ready", "BP", hb,
        "I need a clean bowl on a clean counter for breakfast.",
        bowl, [then(bowl[0], bowl[2]), then(bowl[1], bowl[2])])
    add("bg_living_tidy", "BG", hb,
        "Tidy the living room: wipe the coffee table, turn the TV off and put the "
        "remote away in the box.",
        [A("CLEAN", 530), A("OFF", 534), A("INSIDE", 535, 537)])
    oven = [A("INSIDE", 520, 519), A("CLOSED", 519), A("ON", 519)]
    add("bp_casserole_bake", "BP", hb, "Bake the casserole.",
        oven, [then(oven[0], oven[2]), then(oven[1], oven[2])], infer_omit=[oven[1]])
    add("bg_laptop_shutdown", "BG", hb, "Shut the laptop down and unplug it.",
        [A("OFF", 536), A("PLUGGED_OUT", 536)], infer_omit=[A("PLUGGED_OUT", 536)])
    laundry = [A("INSIDE", 557, 556), A("CLOSED", 556), A("ON", 556)]
    add("bp_laundry_run", "BP", hb, "Run the dirty shirt through the washer.",
        laundry, [then(laundry[0], laundry[2]), then(laundry[1], laundry[2])])
    bench = [A("CLEAN", 552), A("ON", 554, 552)]
    add("bp_workbench_hammer", "BP", hb,
        "Wipe down the workbench, then lay the hammer out on it.",
        bench, [then(bench[0], bench[1])])
    add("bg_mirror_towel", "BG", hb,
        "Clean the bathroom mirror, and the towel is filthy too.",
        [A("CLEAN", 544), A("CLEAN", 541)])
    add("bg_milk_out", "BG", hb,
        "Put the milk out on the counter and make sure the fridge is closed.",
        [A("ON", 518, 510), A("CLOSED", 517)])
    return specs


# ---------------------------------------------------------------------------
# large home: ~300 nodes, VirtualHome-like density of proximity edges

LARGE_ROOMS = ["kitchen", "living_room", "bedroom", "bathroom", "home_office",
               "dining_room", "hallway", "guest_room"]
CLUTTER = [("book", G), ("cushion", G), ("plant", []), ("picture_frame", G),
           ("candle", G), ("remote_control", G), ("magazine", G), ("pen", G),
           ("paper", G), ("box", BOX + G), ("shoe", G), ("clock", []),
           ("vase", G + ["CONTAINER"]), ("toy", G), ("bottle", CUP), ("glass", CUP),
           ("basket", ["CONTAINER", "GRABBABLE"]), ("keys", G), ("headphones", G),
           ("wall_outlet", [])]
FURNITURE = [("table", SURF), ("shelf", SURF + ["CONTAINER"]), ("chair", []),
             ("cabinet", BOX), ("desk", SURF)]


def large_home(seed: int = 7) -> tuple[SceneGraph, dict]:
    rng = random.Random(seed)
    b = SceneBuilder()
    next_id = iter(range(1000, 10**6))
    rooms = {name: b.room(next(next_id), name) for name in LARGE_ROOMS}
    b.agent(1, rooms["living_room"])
    objects: dict[str, list[int]] = {r: [] for r in rooms}

    def put(room: str, name: str, props, parent: int | None = None, states=(),
            on: bool = True) -> int:
        nid = next(next_id)
        where = parent if parent is not None else rooms[room]
        if on:
            b.obj(nid, name, on=where, states=states, props=props)
        else:
            b.obj(nid, name, inside=where, states=states, props=props)
        objects[room].append(nid)
        return nid

    fixed = {}
    fixed["sink"] = put("kitchen", "sink", ["CONTAINER"])
    fixed["faucet"] = put("kitchen", "faucet", ["WATER_SOURCE"])
    fixed["counter"] = put("kitchen", "kitchen_counter", SURF, states=["DIRTY"])
    fixed["dishwasher"] = put("kitchen", "dishwasher", APPLIANCE,
                              states=["CLOSED", "OFF", "PLUGGED_IN"])
    fixed["fridge"] = put("kitchen", "fridge", APPLIANCE,
                          states=["CLOSED", "ON", "PLUGGED_IN"])
    fixed["rag"] = put("kitchen", "rag", TOOL, parent=fixed["counter"])
    fixed["mug"] = put("kitchen", "mug", CUP, parent=fixed["counter"], states=["DIRTY"])
    fixed["office_window"] = put("home_office", "window", ["CAN_OPEN"], states=["OPEN"])
    fixed["office_table"] = put("home_office", "coffee_table", SURF, states=["DIRTY"])
    fixed["office_desk"] = put("home_office", "desk", SURF)
    fixed["office_cup"] = put("home_office", "cup", CUP, parent=fixed["office_desk"],
                              states=["DIRTY"])
    fixed["bath_faucet"] = put("bathroom", "faucet", ["WATER_SOURCE"])
    lights = []
    for room in LARGE_ROOMS:
        lights.append(put(room, "light", ["HAS_SWITCH"], states=["ON"]))
        put(room, "ceilinglamp", [])
        for _ in range(2):
            put(room, "tablelamp", ["HAS_SWITCH", "HAS_PLUG"], states=["OFF", "PLUGGED_IN"])
    fixed["lights"] = lights
    for room in LARGE_ROOMS:
        holders = []
        for name, props in FURNITURE:
            for _ in range(rng.randint(1, 2)):
                states = ["CLOSED"] if "CAN_OPEN" in props else []
                holders.append(put(room, name, props, states=states))
        target = 34 if room != "kitchen" else 28
        while len(objects[room]) < target:
            name, props = rng.choice(CLUTTER)
            states = []
            if "CAN_OPEN" in props:
                states = ["CLOSED"]
            elif "WASHABLE" in props:
                states = [rng.choice(["CLEAN", "DIRTY"])]
            surfaces = [h for h in holders
                        if Property.SURFACE in b.nodes[h].properties]
            if "GRABBABLE" in props and surfaces:
                put(room, name, props, parent=rng.choice(surfaces), states=states)
            else:
                put(room, name, props, states=states)
    # dense static proximity among objects sharing a room
    for room, ids in objects.items():
        for x in ids:
            for y in rng.sample(ids, 6):
                if x != y:
                    b.near(x, y)
    scene = b.build()
    return scene, fixed


def large_specs() -> list[dict]:
    scene, f = large_home()
    teaser = [A("CLOSED", f["office_window"]), A("CLEAN", f["office_table"]),
              A("CLEAN", f["office_cup"]), A("ON", f["office_cup"], f["office_table"])]
    dw = [A("INSIDE", f["mug"], f["dishwasher"]), A("CLOSED", f["dishwasher"]),
          A("ON", f["dishwasher"])]
    return [
        dict(id="lg_teaser", tag="VP", scene=scene,
             request="It's raining into the study and I'm expecting a call. Get the study "
                     "ready so I can have a drink at the coffee table.",
             goals=teaser,
             constraints=[then(teaser[0], teaser[1]), then(teaser[1], teaser[3]),
                          then(teaser[2], teaser[3])], flaws={}),
        dict(id="lg_dishwasher", tag="VP", scene=scene,
             request="Run the dirty mug from the counter through the dishwasher.",
             goals=dw, constraints=[then(dw[0], dw[2]), then(dw[1], dw[2])],
             flaws={"infer_omit": [dw[1]]}),
        dict(id="lg_lights_off", tag="VG", scene=scene,
             request="Switch off the main lights everywhere, I'm leaving.",
             goals=[A("OFF", i) for i in f["lights"]], constraints=[], flaws={}),
    ]


# ---------------------------------------------------------------------------
# scripted model responses

def _helper(scene: SceneGraph, atom: GoalAtom) -> int | None:
    """The tool or water source the oracle slice adds for a CLEAN goal."""
    if atom.predicate != "CLEAN":
        return None
    task = TaskInstance("_", "VG", scene, "", (atom,))
    extra = oracle_nodes(task) - set(atom.args)
    return min(extra) if extra else None


def grounding_response(scene: SceneGraph, goals: list[GoalAtom]) -> str:
    out = []
    for g in goals:
        ids = list(g.args)
        h = _helper(scene, g)
        if h is not None:
            ids.append(h)
        by_room: dict[str, list[str]] = {}
        for i in ids:
            room = scene.nodes[scene.room_of(i)].class_name
            names = by_room.setdefault(room, [])
            if scene.nodes[i].class_name not in names:
                names.append(scene.nodes[i].class_name)
        out.append({"goal": g.render(scene),
                    "selections": [{"room": r, "objects": o} for r, o in by_room.items()]})
    return json.dumps({"goals": out}, indent=1)


def inference_response(goals: list[GoalAtom], flaws: dict) -> str:
    omit = set(flaws.get("infer_omit", ()))
    node_goals, edge_goals = [], []
    for k, g in enumerate(x for x in goals if x not in omit):
        if g.is_unary:
            node_goals.append({"id": g.args[0], "state": g.predicate, "order": k})
        else:
            edge_goals.append({"from": g.args[0], "relation": g.predicate,
                               "to": g.args[1], "order": k})
    node_goals += flaws.get("infer_extra", [])
    text = json.dumps({"node_goals": node_goals, "edge_goals": edge_goals}, indent=1)
    if flaws.get("infer_wrap"):
        text = "Sure, here are the goals I inferred:\n" + text + "\nLet me know if " \
               "anything should change."
    return text


def retrieval_response(scene: SceneGraph, goals: list[GoalAtom]) -> str:
    ids = sorted({a for g in goals for a in g.args}
                 | {h for g in goals if (h := _helper(scene, g)) is not None})
    return json.dumps({"object_ids": ids})


def action_lists(scene: SceneGraph, actions) -> list[list]:
    out = []
    for act in actions:
        row: list = [act.verb.value]
        for a in act.args:
            row += [scene.nodes[a].class_name, a]
        out.append(row)
    return out


def build(specs: list[dict], rules) -> tuple[list[TaskInstance], dict[str, str]]:
    tasks, script = [], {}
    for s in specs:
        scene = s["scene"]
        structure = complete(s["goals"], scene, rules)
        actions = compile_goals(structure.atoms, scene)
        gt = tuple(a.render(scene) for a in actions)
        task = TaskInstance(s["id"], s["tag"], scene, s["request"], tuple(s["goals"]),
                            tuple(s["constraints"]), gt)
        tasks.append(task)
        fl = s["flaws"]
        script[f"{task.id}/ground"] = grounding_response(scene, s["goals"])
        script[f"{task.id}/infer"] = inference_response(s["goals"], fl)
        script[f"{task.id}/retrieve"] = retrieval_response(scene, s["goals"])
        script[f"{task.id}/act"] = json.dumps(fl.get("act") or action_lists(scene, actions))
        if "naive_act" in fl:
            script[prompt_digest(action_prompt(task.request, scene))] = \
                json.dumps(fl["naive_act"])
    return tasks, script


def main() -> None:
    rules = default_rules()
    sample, script = build(sample_specs(), rules)
    large, script_l = build(large_specs(), rules)
    script.update(script_l)
    DATA.mkdir(parents=True, exist_ok=True)
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (DATA / "sample_tasks.json").write_text(dump_task_bundle(sample) + "\n")
    (DATA / "large_home.json").write_text(dump_task_bundle(large) + "\n")
    (DATA / "scripted_responses.json").write_text(
        json.dumps(script, indent=1, sort_keys=True) + "\n")

    teaser = next(t for t in sample if t.id == "vp_teaser_office")
    # drop the last goal's block: the cup is washed but never put down
    cut = max(i for i, a in enumerate(teaser.gt_actions) if a.startswith("[WALK]"))
    broken = TaskInstance("broken_teaser", teaser.environment_tag, teaser.scene,
                          teaser.request, teaser.hidden_goals, teaser.hidden_constraints,
                          teaser.gt_actions[:cut])
    (FIXTURES / "broken_bundle.json").write_text(dump_task_bundle([broken]) + "\n")
    print(f"{len(sample)} sample tasks, {len(large)} large-home tasks "
          f"({len(large[0].scene.nodes)} nodes, {len(large[0].scene.edges)} edges), "
          f"{len(script)} scripted responses")


if __name__ == "__main__":
    main()
