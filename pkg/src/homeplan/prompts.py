"""Prompt templates and the scene serializations they embed.

Placeholders are ``{name}`` and are substituted with :func:`fill`, never
``str.format`` (the templates contain literal JSON braces).
"""

from __future__ import annotations

import json
import re

from .scene import SceneGraph, node_to_dict

GROUNDING = """\
You are a scene retriever for an embodied household agent.

REQUEST:
{request}

SCENE OBJECTS, grouped by room. Each line contains: class_name [count] | states | properties.
{catalog}

Task: decompose the request into individual goals or requirements. For each goal, list the (room, object_class) pairs the robot needs to read or interact with. You do not need to enumerate object IDs or count instances. The system will automatically include all matching objects in that room and add containers, surfaces, rooms, and local context through structural expansion.

GUIDELINES:
- object_class must be the exact class_name shown in the scene table.
- room must be the exact room name. Use "any" only if the object's room cannot be determined from the request.
- Include implicit tools even if they are not mentioned by name:
  wipe or clean a surface -> include rag or towel.
  wash an object -> include sink and faucet.
- Include implicit objects for high-level intents:
  set up for work -> include computer, keyboard, and mouse if present.
- Include destinations for placement requests. For "place A on/in B", list B as well.
- Be inclusive: missing a relevant object may cause task failure.

Output only a JSON object with the following format:
{"goals": [{"goal": "...", "selections": [{"room": "...", "objects": [...]}]}]}"""

INFERENCE = """\
You are a household robot planner. Given a situated household request and the current grounded scene graph, infer the target goal states and process-relevant requirements needed to complete the task.

Output two types of final-state goals:
1. Node goals: an object should reach a specific state.
2. Edge goals: an object should be moved to a specific location or container.

Possible target states for node goals:
ON, OFF, OPEN, CLOSED, CLEAN, PLUGGED_IN, PLUGGED_OUT

Possible relations for edge goals:
ON, INSIDE

Rules:
1. Only include changes from the current state.
2. Use exact object IDs from the grounded scene graph.
3. Include all goals implied by the request and the household context.
4. Do not invent objects that are not present in the grounded scene graph.
5. If ordering is important, list goals in the order they should be achieved.

REQUEST:
{request}

NODES:
{nodes}

EDGES:
{edges}

Output only a JSON object with the following format:
{"node_goals": [...], "edge_goals": [...]}"""

ORDERING_HINT = """\
IMPORTANT: ORDER MATTERS.
List node_goals and edge_goals in the order they should be achieved. Each goal will be executed sequentially against the current scene state. For tasks where order is meaningful, such as cleaning before placing, opening a container before putting an object inside, or preparing an object before serving it, put earlier prerequisites first. For order-independent tasks, any consistent order is acceptable."""

ACTION_SEQUENCING = """\
The task is to guide the robot to take actions from the current scene state based on a situated household request.

Unlike goal-conditioned settings, the input does not explicitly provide node goals, edge goals, process constraints, or oracle actions. You must infer the intended target objects, target states, and target relations from the request and the provided scene graph, and then output a valid grounded skill-level action sequence.

Supported actions include:
CLOSE, GRAB, OPEN, PUTBACK, PUTIN, SWITCHON, SWITCHOFF, WIPE, WASH, PLUGIN, PLUGOUT, WALK.

Key rules:
- WALK to an object before interacting with it.
- GRAB requires a free hand. If both hands are full, release an object first.
- WIPE requires holding a cleaning tool when applicable.
- SWITCHON requires the object to be OFF and PLUGGED_IN when applicable.
- Use only object IDs that appear in the provided scene graph.

REQUEST:
{request}

NODES:
{nodes}

EDGES:
{edges}

Output only a JSON list of action commands."""

# Used by the Retrieve+Act baseline, which selects node ids directly.
RETRIEVAL = """\
You are an object retriever for an embodied household agent.

REQUEST:
{request}

NODES:
{nodes}

Select every node the robot needs to read or interact with to complete the request, including tools, destinations, and containers.

Output only a JSON object with the following format:
{"object_ids": [...]}"""


_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def fill(template: str, **values: str) -> str:
    # single pass, so substituted text is never re-scanned
    return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def render_nodes(scene: SceneGraph) -> str:
    return "\n".join(json.dumps(node_to_dict(scene.nodes[i]))
                     for i in sorted(scene.nodes))


def render_edges(scene: SceneGraph) -> str:
    return "\n".join(
        json.dumps({"from": e.src, "relation": e.relation.value, "to": e.dst})
        for e in sorted(scene.edges))


def action_prompt(request: str, scene: SceneGraph) -> str:
    return fill(ACTION_SEQUENCING, request=request,
                nodes=render_nodes(scene), edges=render_edges(scene))


def retrieval_prompt(request: str, scene: SceneGraph) -> str:
    return fill(RETRIEVAL, request=request, nodes=render_nodes(scene))
