"""Rigid-body poses and the pose metrics consumed by preference functions.

Quaternions are stored as ``(w, x, y, z)`` with the canonical sign ``w >= 0``
(ties at ``w == 0`` are broken by making the first non-zero vector component
positive), so equal rotations always serialize identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
NORMS = ("L1", "L2", "Linf")


class GeometryError(ValueError):
    """Raised when a metric is undefined for its inputs."""


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_canonical(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0 or not math.isfinite(n):
        raise GeometryError(f"invalid quaternion {q!r}")
    q = q / n
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        for c in q[1:]:
            if c != 0.0:
                if c < 0.0:
                    q = -q
                break
    return q + 0.0  # drop negative zeros


def quat_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise GeometryError("rotation axis must be non-zero")
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], axis / n * math.sin(half)))


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    qz = quat_from_axis_angle((0, 0, 1), yaw)
    qy = quat_from_axis_angle((0, 1, 0), pitch)
    qx = quat_from_axis_angle((1, 0, 0), roll)
    return quat_mul(quat_mul(qz, qy), qx)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _cross(u, v) -> np.ndarray:
    # np.cross is slow for single 3-vectors
    return np.array(
        [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    )


def quat_rotate(q: np.ndarray, v) -> np.ndarray:
    w = q[0]
    u = q[1:]
    v = np.asarray(v, dtype=float)
    t = 2.0 * _cross(u, v)
    return v + w * t + _cross(u, t)


@dataclass(frozen=True, eq=False)
class Pose:
    """Position in meters plus a unit quaternion ``(w, x, y, z)``."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        q = quat_canonical(np.array(self.orientation, dtype=float).reshape(4))
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @classmethod
    def identity(cls) -> Pose:
        return cls((0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0))

    @classmethod
    def translation(cls, x: float, y: float, z: float) -> Pose:
        return cls((x, y, z), (1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_axis_angle(cls, axis, angle: float, position=(0.0, 0.0, 0.0)) -> Pose:
        return cls(position, quat_from_axis_angle(axis, angle))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def compose(self, other: Pose) -> Pose:
        return compose(self, other)

    def inverse(self) -> Pose:
        return invert(self)

    def apply(self, point) -> np.ndarray:
        """Map a point from this pose's frame into the parent frame."""
        return self.position + quat_rotate(self.orientation, point)

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.position, other.position)
            and np.array_equal(self.orientation, other.orientation)
        )

    def __hash__(self):
        return hash((self.position.tobytes(), self.orientation.tobytes()))

    def __repr__(self):
        p = ", ".join(f"{v:.6g}" for v in self.position)
        q = ", ".join(f"{v:.6g}" for v in self.orientation)
        return f"Pose(position=[{p}], orientation=[{q}])"

    def isclose(self, other: Pose, tol: float = 1e-9) -> bool:
        return (
            float(np.max(np.abs(self.position - other.position))) <= tol
            and great_circle_distance(self, other) <= tol
        )

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "orientation": [float(v) for v in self.orientation],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Pose:
        return cls(data["position"], data.get("orientation", (1.0, 0.0, 0.0, 0.0)))


def compose(a: Pose, b: Pose) -> Pose:
    """Pose of frame ``b`` (given relative to ``a``) expressed in ``a``'s parent."""
    return Pose(a.apply(b.position), quat_mul(a.orientation, b.orientation))


def invert(p: Pose) -> Pose:
    qi = quat_conj(p.orientation)
    return Pose(-quat_rotate(qi, p.position), qi)


def relative(frame: Pose, pose: Pose) -> Pose:
    """``pose`` expressed in ``frame``."""
    return compose(invert(frame), pose)


def position_norm(
    p1: Pose, p2: Pose, norm: str = "L2", axes: Iterable[str] = ("x", "y", "z")
) -> float:
    idx = [AXIS_INDEX[a] for a in axes]
    if not idx:
        raise GeometryError("positionNorm needs at least one axis")
    d = np.abs(p1.position[idx] - p2.position[idx])
    if norm == "L1":
        return float(d.sum())
    if norm == "L2":
        return float(math.sqrt(float(d @ d)))
    if norm == "Linf":
        return float(d.max())
    raise GeometryError(f"unknown norm {norm!r}; expected one of {NORMS}")


def great_circle_distance(p1: Pose, p2: Pose) -> float:
    """Geodesic angle between the two orientations, in ``[0, pi]``."""
    r = quat_mul(quat_conj(p1.orientation), p2.orientation)
    return 2.0 * math.atan2(float(np.linalg.norm(r[1:])), abs(float(r[0])))


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    return math.atan2(float(np.linalg.norm(_cross(u, v))), float(u @ v))


def pointing_in_direction(p1: Pose, p2: Pose, main_axis=(1.0, 0.0, 0.0)) -> float:
    """Angle between ``main_axis`` rotated into world by ``p1`` and the ray to ``p2``."""
    axis = np.asarray(main_axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise GeometryError("main_axis must be non-zero")
    d = p2.position - p1.position
    dn = np.linalg.norm(d)
    if dn < 1e-12:
        raise GeometryError("pointing direction undefined for coincident positions")
    return _angle_between(quat_rotate(p1.orientation, axis / n), d / dn)


def rotation_angle(p1: Pose, p2: Pose, axis) -> float:
    """Twist of the relative rotation ``q1^-1 q2`` about ``axis`` (in p1's frame).

    Swing-twist decomposition: the twist keeps only the quaternion's vector
    component along ``axis``. Returns an angle in ``[0, pi]``.
    """
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise GeometryError("rotation axis must be non-zero")
    r = quat_mul(quat_conj(p1.orientation), p2.orientation)
    proj = float(r[1:] @ (a / n))
    return 2.0 * math.atan2(abs(proj), abs(float(r[0])))
