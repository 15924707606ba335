"""Primitive library: action spaces, deterministic transitions and feasibility.

Actions live in the normalized box [-1, 1]^d and are mapped affinely onto
per-primitive physical bounds that depend on the state (object size,
workspace, human position).

Feasibility is a product of margin ramps. Each factor is 1 when its
condition holds with at least the ramp width to spare, falls linearly to 0
at the boundary of the condition and is exactly 0 once it is violated, so
a positive feasibility implies every hard condition holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from prefplan.geometry import Pose, compose, invert, quat_from_axis_angle, quat_from_rpy, quat_mul
from prefplan.world.state import Body, Robot, WorldState, separation

PICK = "pick"
PLACE = "place"
HANDOVER = "static_handover"
KINDS = (PICK, PLACE, HANDOVER)
ACTION_DIMS = {PICK: 4, PLACE: 3, HANDOVER: 6}

# Ramp widths, meters.
GRASP_RAMP = 0.005
WORKSPACE_RAMP = 0.005
SURFACE_RAMP = 0.005
CLEARANCE_RAMP = 0.005
REACH_RAMP = 0.02

GRASP_PAD = 0.01
GRIPPER_RADIUS = 0.02
HANDOVER_PAD = 0.05
HANDOVER_ROT = (math.pi / 2, math.pi / 4, math.pi / 4)  # yaw, pitch, roll


class PreconditionError(ValueError):
    """The primitive cannot be applied in this state at all (not a feasibility issue)."""


@dataclass(frozen=True)
class Primitive:
    kind: str
    obj: str
    surface: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown primitive {self.kind!r}")
        if self.kind == PLACE and not self.surface:
            raise ValueError("place needs a target surface")

    @property
    def dim(self) -> int:
        return ACTION_DIMS[self.kind]

    def __str__(self):
        if self.kind == PLACE:
            return f"place({self.obj}, {self.surface})"
        return f"{self.kind}({self.obj})"

    @classmethod
    def parse(cls, text: str) -> Primitive:
        """Inverse of ``str``: ``pick(box)``, ``place(box, table)``, ``static_handover(x)``."""
        text = text.strip()
        head, _, rest = text.partition("(")
        if not rest.endswith(")"):
            raise ValueError(f"malformed primitive {text!r}")
        args = [a.strip().strip("'\"") for a in rest[:-1].split(",") if a.strip()]
        kind = head.strip()
        if kind not in KINDS:
            raise ValueError(f"unknown primitive {kind!r}")
        want = 2 if kind == PLACE else 1
        if len(args) != want:
            raise ValueError(f"{kind} takes {want} argument(s), got {len(args)}")
        return cls(kind, *args)


@dataclass
class Outcome:
    next_state: WorldState
    q: float
    factors: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)

    @property
    def hard_ok(self) -> bool:
        """All hard conditions hold (every margin on the feasible side)."""
        return all(m <= 0.0 for m in self.margins.values())


def sample_action(primitive: Primitive, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, primitive.dim)


def check_preconditions(state: WorldState, p: Primitive):
    if p.obj not in state.objects:
        raise PreconditionError(f"{p}: unknown object {p.obj!r}")
    held = state.robot.held
    if p.kind == PICK:
        if held is not None:
            raise PreconditionError(f"{p}: hand already holds {held!r}")
    elif held != p.obj:
        raise PreconditionError(f"{p}: {p.obj!r} is not held")
    if p.kind == PLACE and p.surface not in state.surfaces:
        raise PreconditionError(f"{p}: unknown surface {p.surface!r}")
    if p.kind == HANDOVER and state.human is None:
        raise PreconditionError(f"{p}: no human in the scene")


def bounds(state: WorldState, p: Primitive) -> tuple[np.ndarray, np.ndarray]:
    """Physical lower/upper bounds of the action parameters."""
    if p.kind == PICK:
        lo, hi = state.objects[p.obj].shape.aabb
        return (
            np.concatenate([lo - GRASP_PAD, [-math.pi]]),
            np.concatenate([hi + GRASP_PAD, [math.pi]]),
        )
    if p.kind == PLACE:
        c = np.asarray(state.workspace.center[:2])
        r = state.workspace.radius
        return np.array([c[0] - r, c[1] - r, -math.pi]), np.array([c[0] + r, c[1] + r, math.pi])
    h = state.human
    half = h.reach_radius + HANDOVER_PAD
    rot = np.array(HANDOVER_ROT)
    return np.concatenate([h.centroid - half, -rot]), np.concatenate([h.centroid + half, rot])


def to_physical(state: WorldState, p: Primitive, action) -> np.ndarray:
    u = np.asarray(action, dtype=float)
    if u.shape != (p.dim,):
        raise ValueError(f"{p} expects {p.dim} action components, got shape {u.shape}")
    if np.any(np.abs(u) > 1.0) or not np.all(np.isfinite(u)):
        raise ValueError(f"action components must lie in [-1, 1]: {u}")
    lo, hi = bounds(state, p)
    return lo + 0.5 * (u + 1.0) * (hi - lo)


def _ramp(excess: float, width: float) -> float:
    """1 for excess <= -width, linear to 0 at excess 0, 0 beyond."""
    return min(1.0, max(0.0, -excess / width))


def _clearance(sep: float) -> float:
    return _ramp(-sep, CLEARANCE_RAMP)


def _min_separation(state: WorldState, body: Body) -> float:
    """Smallest separation to any other object.

    Pairs whose bounding balls are already past the clearance ramp in the
    plane skip the exact test and contribute that lower bound instead, which
    leaves every factor and margin sign unchanged.
    """
    best = math.inf
    p = body.pose.position
    r = body.shape.bound_radius
    for other in state.objects.values():
        if other.id == body.id:
            continue
        q = other.pose.position
        lb = math.hypot(p[0] - q[0], p[1] - q[1]) - r - other.shape.bound_radius
        if lb >= CLEARANCE_RAMP:
            best = min(best, lb)
        else:
            best = min(best, separation(body, other))
    return best


def step(state: WorldState, p: Primitive, action) -> Outcome:
    """Apply ``p`` with normalized ``action``; successor plus its feasibility."""
    check_preconditions(state, p)
    x = to_physical(state, p, action)
    if p.kind == PICK:
        return _pick(state, p, x)
    if p.kind == PLACE:
        return _place(state, p, x)
    return _handover(state, p, x)


def _pick(state, p, x) -> Outcome:
    body = state.objects[p.obj]
    offset = x[:3]
    grasp = Pose(offset, quat_from_axis_angle((0.0, 0.0, 1.0), x[3]))
    ee = compose(body.pose, grasp)
    nxt = replace(state, robot=Robot(ee, p.obj, invert(grasp)))
    sd = body.shape.signed_distance(offset)
    excess = state.workspace.excess(ee.position)
    # finger clearance: a small cylinder around the grasp point against every other object
    sep = math.inf
    for other in state.objects.values():
        if other.id != p.obj:
            sep = min(sep, other.signed_distance(ee.position) - GRIPPER_RADIUS)
    margins = {"grasp": sd, "workspace": excess, "clearance": -sep}
    factors = {
        "grasp": _ramp(sd, GRASP_RAMP),
        "workspace": _ramp(excess, WORKSPACE_RAMP),
        "clearance": _clearance(sep),
    }
    return Outcome(nxt, math.prod(factors.values()), factors, margins)


def _place(state, p, x) -> Outcome:
    body = state.objects[p.obj]
    surface = state.surfaces[p.surface]
    q = quat_mul(quat_from_axis_angle((0.0, 0.0, 1.0), x[2]), body.pose.orientation)
    rot = Pose((0.0, 0.0, 0.0), q)
    z = surface.height - body.shape.lowest_z(rot.rotation)
    placed = body.moved(Pose((x[0], x[1], z), rot.orientation))
    ee = compose(placed.pose, invert(state.robot.grasp))
    nxt = replace(state, objects={**state.objects, p.obj: placed}, robot=Robot(ee))
    outside = surface.outside_distance(x[0], x[1])
    excess = state.workspace.excess(ee.position)
    sep = _min_separation(state, placed)
    margins = {"surface": outside, "workspace": excess, "clearance": -sep}
    factors = {
        "surface": _ramp(outside, SURFACE_RAMP),
        "workspace": _ramp(excess, WORKSPACE_RAMP),
        "clearance": _clearance(sep),
    }
    return Outcome(nxt, math.prod(factors.values()), factors, margins)


def _handover(state, p, x) -> Outcome:
    yaw, pitch, roll = x[3:]
    ee_q = quat_mul(quat_from_rpy(roll, pitch, yaw), state.robot.ee_pose.orientation)
    ee = Pose(x[:3], ee_q)
    moved = state.objects[p.obj].moved(compose(ee, state.robot.grasp))
    nxt = replace(
        state,
        objects={**state.objects, p.obj: moved},
        robot=replace(state.robot, ee_pose=ee),
    )
    reach = state.human.reach_excess(ee.position)
    excess = state.workspace.excess(ee.position)
    sep = _min_separation(state, moved)
    margins = {"reach": reach, "workspace": excess, "clearance": -sep}
    factors = {
        "reach": _ramp(reach, REACH_RAMP),
        "workspace": _ramp(excess, WORKSPACE_RAMP),
        "clearance": _clearance(sep),
    }
    return Outcome(nxt, math.prod(factors.values()), factors, margins)


def transition(state: WorldState, p: Primitive, action) -> WorldState:
    return step(state, p, action).next_state


def feasibility(state: WorldState, p: Primitive, action) -> float:
    return step(state, p, action).q
