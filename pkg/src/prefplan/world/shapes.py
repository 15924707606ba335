"""Primitive solids: exact signed distance, support height and a conservative hull cloud."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from prefplan.geometry import Pose, quat_to_matrix

# Sides of the polygon circumscribing a cylinder's cross-section.
CIRCLE_SIDES = 16


class Shape:
    kind = ""

    def signed_distance(self, p) -> float:
        """Signed distance from local point ``p`` to the surface (negative inside)."""
        raise NotImplementedError

    def lowest_z(self, rotation: np.ndarray) -> float:
        """Minimum z of the shape rotated by ``rotation`` (about its local origin)."""
        raise NotImplementedError

    @cached_property
    def hull_points(self) -> np.ndarray:
        """Local points whose convex hull contains the shape."""
        raise NotImplementedError

    @cached_property
    def bound_radius(self) -> float:
        """Radius of a ball about the local origin containing the shape."""
        return float(np.sqrt((self.hull_points**2).sum(axis=1)).max())

    @cached_property
    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        pts = self.hull_points
        return pts.min(axis=0), pts.max(axis=0)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Box(Shape):
    """Axis-aligned box centred on the origin; ``extents`` are full side lengths."""

    extents: tuple[float, float, float]
    kind = "box"

    def __post_init__(self):
        ext = tuple(float(v) for v in self.extents)
        if len(ext) != 3 or min(ext) <= 0:
            raise ValueError(f"box extents must be 3 positive lengths, got {self.extents}")
        object.__setattr__(self, "extents", ext)

    @cached_property
    def half(self) -> np.ndarray:
        return 0.5 * np.array(self.extents)

    def signed_distance(self, p) -> float:
        q = np.abs(np.asarray(p, dtype=float)) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0))
        return float(outside + min(q.max(), 0.0))

    def lowest_z(self, rotation) -> float:
        return -float(np.abs(rotation[2]) @ self.half)

    @cached_property
    def hull_points(self) -> np.ndarray:
        signs = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], float)
        return signs * self.half

    def to_dict(self):
        return {"type": "box", "extents": list(self.extents)}


@dataclass(frozen=True)
class Cylinder(Shape):
    """Solid cylinder along the local z axis, centred on the origin."""

    radius: float
    height: float
    kind = "cylinder"

    def __post_init__(self):
        if not (self.radius > 0 and self.height > 0):
            raise ValueError("cylinder radius and height must be positive")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "height", float(self.height))

    def signed_distance(self, p) -> float:
        x, y, z = (float(v) for v in p)
        dr = math.hypot(x, y) - self.radius
        dz = abs(z) - 0.5 * self.height
        return min(max(dr, dz), 0.0) + math.hypot(max(dr, 0.0), max(dz, 0.0))

    def lowest_z(self, rotation) -> float:
        c = min(abs(float(rotation[2, 2])), 1.0)
        return -(0.5 * self.height * c + self.radius * math.sqrt(1.0 - c * c))

    @cached_property
    def hull_points(self) -> np.ndarray:
        r = self.radius / math.cos(math.pi / CIRCLE_SIDES)
        ang = 2.0 * math.pi * np.arange(CIRCLE_SIDES) / CIRCLE_SIDES
        ring = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
        h = 0.5 * self.height
        return np.vstack(
            [np.column_stack([ring, np.full(CIRCLE_SIDES, z)]) for z in (-h, h)]
        )

    def to_dict(self):
        return {"type": "cylinder", "radius": self.radius, "height": self.height}


@dataclass(frozen=True, eq=False)
class Composite(Shape):
    """Union of posed sub-shapes."""

    parts: tuple[tuple[Pose, Shape], ...]
    kind = "composite"

    def __post_init__(self):
        if not self.parts:
            raise ValueError("composite shape needs at least one part")
        object.__setattr__(self, "parts", tuple((p, s) for p, s in self.parts))

    def signed_distance(self, p) -> float:
        p = np.asarray(p, dtype=float)
        best = math.inf
        for pose, shape in self.parts:
            local = pose.rotation.T @ (p - pose.position)
            best = min(best, shape.signed_distance(local))
        return best

    def lowest_z(self, rotation) -> float:
        return min(
            float((rotation @ pose.position)[2]) + shape.lowest_z(rotation @ pose.rotation)
            for pose, shape in self.parts
        )

    @cached_property
    def hull_points(self) -> np.ndarray:
        return np.vstack(
            [pose.position + shape.hull_points @ pose.rotation.T for pose, shape in self.parts]
        )

    def __eq__(self, other):
        if not isinstance(other, Composite):
            return NotImplemented
        return self.parts == other.parts

    def __hash__(self):
        return hash(self.parts)

    def to_dict(self):
        return {
            "type": "composite",
            "parts": [{"pose": p.to_dict(), "shape": s.to_dict()} for p, s in self.parts],
        }


def shape_from_dict(data: dict) -> Shape:
    kind = data["type"]
    if kind == "box":
        return Box(tuple(data["extents"]))
    if kind == "cylinder":
        return Cylinder(data["radius"], data["height"])
    if kind == "composite":
        return Composite(
            tuple((Pose.from_dict(p["pose"]), shape_from_dict(p["shape"])) for p in data["parts"])
        )
    raise ValueError(f"unknown shape type {kind!r}")


def world_points(shape: Shape, pose: Pose) -> np.ndarray:
    return pose.position + shape.hull_points @ quat_to_matrix(pose.orientation).T
