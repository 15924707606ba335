"""Time-parameterized end-effector paths.

A path is a polyline of waypoints; the robot comes to rest at every
waypoint. Speed follows a discrete profile: each step changes the speed by
at most ``a_max * dt`` and positions advance by the trapezoid
``(v + v') / 2 * dt``, so the samples are exactly consistent with a
piecewise-constant acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from prefplan.safety.params import DT, ControllerParams

MAX_DURATION = 120.0


class TrajectoryError(ValueError):
    pass


class Path:
    def __init__(self, waypoints, orientations=None):
        w = np.array(waypoints, dtype=float).reshape(-1, 3)
        if len(w) < 1:
            raise TrajectoryError("a path needs at least one waypoint")
        self.waypoints = w
        if orientations is None:
            orientations = np.tile([1.0, 0.0, 0.0, 0.0], (len(w), 1))
        self.orientations = np.array(orientations, dtype=float).reshape(-1, 4)
        if len(self.orientations) != len(w):
            raise TrajectoryError("one orientation per waypoint is required")
        d = np.diff(w, axis=0)
        self.lengths = np.linalg.norm(d, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.dirs = np.where(self.lengths[:, None] > 0, d / self.lengths[:, None], 0.0)
        self.segments = len(self.lengths)
        # plain floats for the per-step arithmetic
        self.seg_len = [float(x) for x in self.lengths]

    def point(self, seg: int, s: float) -> np.ndarray:
        if seg >= self.segments:
            return self.waypoints[-1].copy()
        return self.waypoints[seg] + self.dirs[seg] * s

    def orientations_at(self, segs, ss) -> np.ndarray:
        """Vectorized ``orientation``."""
        segs = np.asarray(segs, dtype=int)
        ss = np.asarray(ss, dtype=float)
        out = np.tile(self.orientations[-1], (len(segs), 1))
        mid = segs < self.segments
        i = segs[mid]
        q0 = self.orientations[i]
        q1 = self.orientations[i + 1] * np.where(np.sum(q0 * self.orientations[i + 1], axis=1) < 0, -1.0, 1.0)[:, None]
        ln = self.lengths[i]
        f = np.where(ln > 0, ss[mid] / np.where(ln > 0, ln, 1.0), 1.0)[:, None]
        q = (1 - f) * q0 + f * q1
        out[mid] = q / np.linalg.norm(q, axis=1)[:, None]
        return out

    def points(self, segs, ss) -> np.ndarray:
        """Vectorized ``point`` over arrays of segment indices and arc lengths."""
        segs = np.asarray(segs, dtype=int)
        ss = np.asarray(ss, dtype=float)
        out = np.empty((len(segs), 3))
        end = segs >= self.segments
        out[end] = self.waypoints[-1]
        i = segs[~end]
        out[~end] = self.waypoints[i] + self.dirs[i] * ss[~end][:, None]
        return out

    def orientation(self, seg: int, s: float) -> np.ndarray:
        if seg >= self.segments:
            return self.orientations[-1].copy()
        q0, q1 = self.orientations[seg], self.orientations[seg + 1]
        if q0 @ q1 < 0:
            q1 = -q1
        f = s / self.lengths[seg] if self.lengths[seg] > 0 else 1.0
        q = (1 - f) * q0 + f * q1
        return q / np.linalg.norm(q)


@dataclass
class Cursor:
    """Where the robot is along a path: segment index, arc length in it, speed."""

    seg: int
    s: float
    v: float

    def copy(self):
        return Cursor(self.seg, self.s, self.v)


def skip_empty(path: Path, c: Cursor) -> Cursor:
    while c.seg < path.segments and path.seg_len[c.seg] - c.s <= 0.0:
        c = Cursor(c.seg + 1, 0.0, 0.0)
    return c


def max_speed(c: Cursor, path: Path, a: float, v_max: float, dt: float) -> float:
    """Largest next speed that still allows stopping at the segment end."""
    r = path.seg_len[c.seg] - c.s
    disc = a * a * dt * dt - a * c.v * dt + 2.0 * a * r
    root = -a * dt + math.sqrt(max(disc, 0.0))
    return max(0.0, min(c.v + a * dt, v_max, root))


def advance(c: Cursor, path: Path, v_next: float, a: float, dt: float) -> Cursor:
    """One step to speed ``v_next`` (clamped to the stopping envelope).

    Near the end of a segment the final sliver is covered in one step
    and the robot comes to rest exactly on the waypoint.
    """
    c = skip_empty(path, c)
    if c.seg >= path.segments:
        return Cursor(c.seg, 0.0, 0.0)
    r = path.seg_len[c.seg] - c.s
    if r <= 0.5 * a * dt * dt and c.v <= a * dt:
        return skip_empty(path, Cursor(c.seg + 1, 0.0, 0.0))
    v_next = min(v_next, max_speed(c, path, a, math.inf, dt))
    s = c.s + 0.5 * (c.v + v_next) * dt
    return Cursor(c.seg, min(s, path.seg_len[c.seg]), v_next)


def intended(c: Cursor, path: Path, params: ControllerParams, dt: float) -> Cursor:
    c = skip_empty(path, c)
    if c.seg >= path.segments:
        return c
    return advance(c, path, max_speed(c, path, params.a_max, params.v_max, dt), params.a_max, dt)


def braking(c: Cursor, path: Path, params: ControllerParams, cap: float, dt: float) -> Cursor:
    """Failsafe step: slow towards ``cap`` at full deceleration, never faster than intended."""
    c = skip_empty(path, c)
    if c.seg >= path.segments:
        return c
    want = max_speed(c, path, params.a_max, params.v_max, dt)
    v = max(c.v - params.a_max * dt, min(cap, want))
    return advance(c, path, v, params.a_max, dt)


@dataclass
class TimedTrajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    orientations: np.ndarray
    dt: float = DT
    path: Path | None = field(default=None, repr=False)
    completed: bool = True

    def __len__(self):
        return len(self.times)

    @property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.velocities, axis=1)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def check(self, params: ControllerParams, tol: float = 1e-9):
        """Raise when the samples break the speed or acceleration limits."""
        if np.any(np.diff(self.times) <= 0):
            raise TrajectoryError("times must be strictly increasing")
        if not np.all(np.isfinite(self.velocities)):
            raise TrajectoryError("velocities must be finite")
        sp = self.speeds
        if sp.max(initial=0.0) > params.v_max + tol:
            raise TrajectoryError(f"speed {sp.max():.6g} exceeds v_max {params.v_max}")
        acc = np.abs(np.diff(sp)) / self.dt
        if acc.max(initial=0.0) > params.a_max + tol:
            raise TrajectoryError(f"acceleration {acc.max():.6g} exceeds a_max {params.a_max}")

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "completed": self.completed,
            "waypoints": None if self.path is None else self.path.waypoints.tolist(),
            "samples": [
                {
                    "t": float(t),
                    "pose": {"position": p.tolist(), "orientation": q.tolist()},
                    "velocity": v.tolist(),
                }
                for t, p, q, v in zip(self.times, self.positions, self.orientations, self.velocities)
            ],
        }


class Recorder:
    def __init__(self, path: Path, dt: float, t0: float = 0.0):
        self.path = path
        self.dt = dt
        self.t0 = t0
        self.segs, self.ss, self.vs = [], [], []

    def add(self, k: int, c: Cursor):
        # k is implied by the call order; samples are evenly spaced
        self.segs.append(c.seg)
        self.ss.append(c.s)
        self.vs.append(c.v)

    def build(self, completed=True) -> TimedTrajectory:
        path = self.path
        n = len(self.segs)
        segs = np.array(self.segs, dtype=int)
        ss = np.array(self.ss, dtype=float)
        times = self.t0 + np.arange(n) * self.dt
        pos = path.points(segs, ss)
        dirs = np.vstack([path.dirs, np.zeros((1, 3))]) if path.segments else np.zeros((1, 3))
        vel = dirs[np.minimum(segs, path.segments)] * np.array(self.vs)[:, None]
        ori = path.orientations_at(segs, ss)
        return TimedTrajectory(times, pos, vel, ori, self.dt, path, completed)


def plan_trajectory(
    waypoints, params: ControllerParams, orientations=None, dt: float = DT, t0: float = 0.0
) -> TimedTrajectory:
    """Nominal rest-to-rest profile through all waypoints."""
    path = Path(waypoints, orientations)
    rec = Recorder(path, dt, t0)
    c = skip_empty(path, Cursor(0, 0.0, 0.0))
    rec.add(0, c)
    k = 0
    limit = int(MAX_DURATION / dt)
    while c.seg < path.segments and k < limit:
        c = intended(c, path, params, dt)
        k += 1
        rec.add(k, c)
    return rec.build(c.seg >= path.segments)
