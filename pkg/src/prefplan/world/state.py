"""World state: objects, surfaces, the robot end effector and the human."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Mapping

import numpy as np
import shapely

from prefplan.geometry import Pose, compose
from prefplan.world.shapes import Shape, shape_from_dict, world_points

# Names that never refer to scenario objects.
EE = "ee"
HUMAN = "human"
WORLD = "world"
RESERVED = frozenset({EE, HUMAN, WORLD})


@dataclass(frozen=True, eq=False)
class Body:
    id: str
    shape: Shape
    pose: Pose

    @cached_property
    def points(self) -> np.ndarray:
        return world_points(self.shape, self.pose)

    @cached_property
    def footprint(self):
        """Convex hull of the xy projection; with ``z_range`` it bounds the body by a prism."""
        return shapely.convex_hull(shapely.multipoints(self.points[:, :2]))

    @cached_property
    def z_range(self) -> tuple[float, float]:
        z = self.points[:, 2]
        return float(z.min()), float(z.max())

    def moved(self, pose: Pose) -> Body:
        return Body(self.id, self.shape, pose)

    def signed_distance(self, point) -> float:
        local = self.pose.rotation.T @ (np.asarray(point, dtype=float) - self.pose.position)
        return self.shape.signed_distance(local)


def separation(a: Body, b: Body) -> float:
    """Distance between the bounding prisms of two bodies; negative when they overlap.

    Never larger than the true distance, so a positive value guarantees the
    bodies are apart. The negative branch is only a rough penetration depth.
    """
    za0, za1 = a.z_range
    zb0, zb1 = b.z_range
    dz = max(zb0 - za1, za0 - zb1)
    dxy = float(shapely.distance(a.footprint, b.footprint))
    if dxy > 0.0 or dz > 0.0:
        return math.hypot(dxy, max(dz, 0.0))
    overlap = shapely.intersection(a.footprint, b.footprint).area
    return -min(-dz, math.sqrt(overlap))


@dataclass(frozen=True)
class Surface:
    """Horizontal rectangle at height ``center[2]``; ``extents`` are full x/y sizes."""

    id: str
    center: tuple[float, float, float]
    extents: tuple[float, float]

    def outside_distance(self, x: float, y: float) -> float:
        """Distance from (x, y) to the rectangle, negative inside (to the nearest edge)."""
        qx = abs(x - self.center[0]) - 0.5 * self.extents[0]
        qy = abs(y - self.center[1]) - 0.5 * self.extents[1]
        return math.hypot(max(qx, 0.0), max(qy, 0.0)) + min(max(qx, qy), 0.0)

    @property
    def height(self) -> float:
        return self.center[2]


@dataclass(frozen=True)
class Workspace:
    center: tuple[float, float, float]
    radius: float

    def excess(self, point) -> float:
        return float(np.linalg.norm(np.asarray(point) - np.asarray(self.center))) - self.radius


@dataclass(frozen=True, eq=False)
class Human:
    keypoints: np.ndarray
    reach_radius: float = 0.3
    body_radius: float = 0.3
    max_speed: float = 2.0

    def __post_init__(self):
        kp = np.array(self.keypoints, dtype=float).reshape(-1, 3)
        if len(kp) == 0:
            raise ValueError("human needs at least one keypoint")
        kp.flags.writeable = False
        object.__setattr__(self, "keypoints", kp)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.keypoints.mean(axis=0)

    def reach_excess(self, point) -> float:
        d = np.linalg.norm(self.keypoints - np.asarray(point), axis=1)
        return float(d.min()) - self.reach_radius

    def __eq__(self, other):
        return (
            isinstance(other, Human)
            and np.array_equal(self.keypoints, other.keypoints)
            and (self.reach_radius, self.body_radius, self.max_speed)
            == (other.reach_radius, other.body_radius, other.max_speed)
        )


@dataclass(frozen=True)
class Robot:
    ee_pose: Pose
    held: str | None = None
    # pose of the held object in the end-effector frame
    grasp: Pose | None = None


@dataclass(frozen=True, eq=False)
class WorldState:
    """Immutable snapshot; transitions return new instances."""

    objects: Mapping[str, Body]
    surfaces: Mapping[str, Surface]
    robot: Robot
    workspace: Workspace
    human: Human | None = None

    def pose_of(self, name: str) -> Pose:
        if name in self.objects:
            return self.objects[name].pose
        if name == EE:
            return self.robot.ee_pose
        if name == HUMAN:
            if self.human is None:
                raise KeyError(name)
            return Pose(self.human.centroid, (1.0, 0.0, 0.0, 0.0))
        if name in self.surfaces:
            return Pose(self.surfaces[name].center, (1.0, 0.0, 0.0, 0.0))
        if name == WORLD:
            return Pose.identity()
        raise KeyError(name)

    @property
    def names(self) -> frozenset[str]:
        """Everything ``pose_of`` can resolve besides 'world'."""
        out = set(self.objects) | set(self.surfaces) | {EE}
        if self.human is not None:
            out.add(HUMAN)
        return frozenset(out)

    def catalog(self):
        from prefplan.dsl import Catalog

        return Catalog(self.names, self.names | {WORLD})

    def free_objects(self):
        return [b for k, b in self.objects.items() if k != self.robot.held]

    def with_objects(self, **updates: Body) -> WorldState:
        objs = dict(self.objects)
        objs.update(updates)
        return replace(self, objects=objs)

    def held_pose_consistent(self, tol: float = 1e-9) -> bool:
        if self.robot.held is None:
            return True
        expect = compose(self.robot.ee_pose, self.robot.grasp)
        return self.objects[self.robot.held].pose.isclose(expect, tol)

    def to_dict(self) -> dict:
        out = {
            "objects": [
                {"id": b.id, "shape": b.shape.to_dict(), "pose": b.pose.to_dict()}
                for b in self.objects.values()
            ],
            "surfaces": [
                {"id": s.id, "center": list(s.center), "extents": list(s.extents)}
                for s in self.surfaces.values()
            ],
            "robot": {
                "ee_pose": self.robot.ee_pose.to_dict(),
                "workspace": {
                    "center": list(self.workspace.center),
                    "radius": self.workspace.radius,
                },
            },
        }
        if self.robot.held is not None:
            out["robot"]["held"] = {
                "object": self.robot.held,
                "grasp": self.robot.grasp.to_dict(),
            }
        if self.human is not None:
            out["human"] = {
                "keypoints": self.human.keypoints.tolist(),
                "reach_radius": self.human.reach_radius,
                "body_radius": self.human.body_radius,
                "max_speed": self.human.max_speed,
            }
        return out

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def state_from_dict(doc: dict) -> WorldState:
    """Build a state from an already-validated scenario document."""
    objects = {}
    for o in doc.get("objects", []):
        objects[o["id"]] = Body(o["id"], shape_from_dict(o["shape"]), Pose.from_dict(o["pose"]))
    surfaces = {
        s["id"]: Surface(s["id"], tuple(map(float, s["center"])), tuple(map(float, s["extents"])))
        for s in doc.get("surfaces", [])
    }
    r = doc["robot"]
    ws = Workspace(tuple(map(float, r["workspace"]["center"])), float(r["workspace"]["radius"]))
    held = r.get("held")
    ee = Pose.from_dict(r["ee_pose"])
    if held:
        grasp = Pose.from_dict(held["grasp"])
        obj = objects[held["object"]]
        objects[obj.id] = obj.moved(compose(ee, grasp))
        robot = Robot(ee, obj.id, grasp)
    else:
        robot = Robot(ee)
    human = None
    if doc.get("human"):
        h = doc["human"]
        human = Human(
            h["keypoints"],
            float(h.get("reach_radius", 0.3)),
            float(h.get("body_radius", 0.3)),
            float(h.get("max_speed", 2.0)),
        )
    return WorldState(objects, surfaces, robot, ws, human)
