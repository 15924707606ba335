"""Scenario documents: JSON schema, loading and initial-state randomization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from prefplan.geometry import Pose, quat_from_axis_angle, quat_mul
from prefplan.world.primitives import HANDOVER, PICK, PLACE, Primitive
from prefplan.world.state import RESERVED, WorldState, separation, state_from_dict

OVERLAP_TOL = 1e-6

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_POSE = {
    "type": "object",
    "required": ["position"],
    "properties": {
        "position": _VEC3,
        "orientation": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
    },
}
_SHAPE = {
    "type": "object",
    "required": ["type"],
    "oneOf": [
        {
            "properties": {
                "type": {"const": "box"},
                "extents": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
            "required": ["extents"],
        },
        {
            "properties": {
                "type": {"const": "cylinder"},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "height": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["radius", "height"],
        },
        {
            "properties": {
                "type": {"const": "composite"},
                "parts": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["pose", "shape"],
                        "properties": {"pose": _POSE, "shape": {"$ref": "#/$defs/shape"}},
                    },
                },
            },
            "required": ["parts"],
        },
    ],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"shape": _SHAPE},
    "type": "object",
    "required": ["objects", "surfaces", "robot"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "shape", "pose"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "shape": {"$ref": "#/$defs/shape"},
                    "pose": _POSE,
                    "color": {"type": "string"},
                },
            },
        },
        "surfaces": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "center", "extents"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "center": _VEC3,
                    "extents": {
                        "type": "array",
                        "items": {"type": "number", "exclusiveMinimum": 0},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "human": {
            "type": ["object", "null"],
            "required": ["keypoints", "reach_radius"],
            "properties": {
                "keypoints": {"type": "array", "items": _VEC3, "minItems": 1},
                "reach_radius": {"type": "number", "exclusiveMinimum": 0},
                "body_radius": {"type": "number", "exclusiveMinimum": 0},
                "max_speed": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "robot": {
            "type": "object",
            "required": ["ee_pose", "workspace"],
            "properties": {
                "ee_pose": _POSE,
                "workspace": {
                    "type": "object",
                    "required": ["center", "radius"],
                    "properties": {
                        "center": _VEC3,
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "held": {
                    "type": "object",
                    "required": ["object", "grasp"],
                    "properties": {"object": {"type": "string"}, "grasp": _POSE},
                },
            },
        },
        "jitter": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "xy": {"type": "number", "minimum": 0},
                    "yaw": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    state: WorldState
    primitives: list[Primitive]
    surfaces: list[str]
    jitter: dict = field(default_factory=dict)
    name: str = ""
    document: dict = field(default_factory=dict, repr=False)


def _check_refs(doc: dict):
    ids = [o["id"] for o in doc["objects"]]
    sids = [s["id"] for s in doc["surfaces"]]
    seen = set()
    for i in ids + sids:
        if i in RESERVED:
            raise ScenarioError(f"id {i!r} is reserved")
        if i in seen:
            raise ScenarioError(f"duplicate id {i!r}")
        seen.add(i)
    held = doc["robot"].get("held")
    if held and held["object"] not in ids:
        raise ScenarioError(f"held object {held['object']!r} does not exist")
    for k in doc.get("jitter", {}):
        if k not in ids:
            raise ScenarioError(f"jitter refers to unknown object {k!r}")


def check_overlaps(state: WorldState):
    free = state.free_objects()
    for i, a in enumerate(free):
        for b in free[i + 1 :]:
            if separation(a, b) < -OVERLAP_TOL:
                raise ScenarioError(f"objects {a.id!r} and {b.id!r} overlap")


def primitive_catalog(state: WorldState) -> list[Primitive]:
    out = []
    for o in state.objects:
        out.append(Primitive(PICK, o))
        out.extend(Primitive(PLACE, o, s) for s in state.surfaces)
        if state.human is not None:
            out.append(Primitive(HANDOVER, o))
    return out


def load_scenario(source) -> Scenario:
    """Load from a dict, a JSON string or a path."""
    if isinstance(source, dict):
        doc = source
    elif isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            doc = json.loads(Path(source).read_text())
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{source}: invalid JSON: {e}") from e
    else:
        doc = json.loads(source)
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {e.message}") from None
    _check_refs(doc)
    try:
        state = state_from_dict(doc)
    except ValueError as e:
        raise ScenarioError(str(e)) from e
    check_overlaps(state)
    return Scenario(
        state,
        primitive_catalog(state),
        list(state.surfaces),
        doc.get("jitter", {}),
        doc.get("name", ""),
        doc,
    )


def jittered(scenario: Scenario, rng: np.random.Generator, tries: int = 100) -> WorldState:
    """Initial state with each jittered object shifted/rotated uniformly within its ranges.

    Draws are rejected while any two free objects overlap.
    """
    state = scenario.state
    if not scenario.jitter:
        return state
    for _ in range(tries):
        objs = dict(state.objects)
        for oid, rng_spec in scenario.jitter.items():
            if oid == state.robot.held:
                continue
            b = objs[oid]
            dxy = float(rng_spec.get("xy", 0.0))
            dyaw = float(rng_spec.get("yaw", 0.0))
            dx, dy = rng.uniform(-dxy, dxy, 2) if dxy else (0.0, 0.0)
            yaw = rng.uniform(-dyaw, dyaw) if dyaw else 0.0
            q = quat_mul(quat_from_axis_angle((0, 0, 1), yaw), b.pose.orientation)
            pos = b.pose.position + np.array([dx, dy, 0.0])
            objs[oid] = b.moved(Pose(pos, q))
        cand = replace(state, objects=objs)
        try:
            check_overlaps(cand)
        except ScenarioError:
            continue
        return cand
    raise ScenarioError(f"could not draw a collision-free initial state in {tries} tries")


def validate_document(doc: dict) -> list[str]:
    """Schema and reference problems as messages; empty when the document is valid."""
    errors = [
        f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
        for e in jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc)
    ]
    if not errors:
        try:
            _check_refs(doc)
            check_overlaps(state_from_dict(doc))
        except (ScenarioError, ValueError) as e:
            errors.append(str(e))
    return errors

