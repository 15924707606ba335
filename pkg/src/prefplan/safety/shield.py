"""Reachable-set occupancies and the online verification shield.

At every control step the shield proposes the intended next step and
checks a failsafe fragment: that step followed by full braking down to the
mode's speed cap (0 for ``stop``, the contact speed otherwise). Every
interval of the fragment in which the robot is faster than the cap must have
a robot occupancy disjoint from the human occupancy, whose spheres grow with
the human's maximum speed from the current time to the interval end. If the
check fails the robot continues on the previously verified failsafe, which
is the braking rule itself, so it only ever traverses verified intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from prefplan.safety.params import (
    BODY_RADIUS,
    DT,
    F_MAX,
    HUMAN_SPEED,
    LINK_RADIUS,
    MODES,
    ControllerParams,
)
from prefplan.safety.trajectory import (
    MAX_DURATION,
    Cursor,
    Recorder,
    TimedTrajectory,
    TrajectoryError,
    braking,
    intended,
    skip_empty,
)


@dataclass(frozen=True)
class ReachParams:
    v_h: float = HUMAN_SPEED
    delta: float = 0.005
    body_radius: float = BODY_RADIUS
    link_radius: float = LINK_RADIUS

    def __post_init__(self):
        if not self.v_h > 0:
            raise ValueError("human speed must be positive")
        if self.delta < 0:
            raise ValueError("disturbance radius must be non-negative")


@dataclass
class Occupancy:
    """Union of spheres plus capsules (segments swept by a sphere)."""

    centers: np.ndarray
    radii: np.ndarray
    caps: list = field(default_factory=list)  # (a, b, radius)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 3)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        if len(self.centers) == 0:
            raise ValueError("occupancy must not be empty")
        if np.any(self.radii <= 0):
            raise ValueError("occupancy radii must be positive")

    def contains(self, point, radius: float = 0.0, tol: float = 1e-12) -> bool:
        """True when the ball (point, radius) lies inside one sphere or capsule."""
        p = np.asarray(point, dtype=float)
        d = np.linalg.norm(self.centers - p, axis=1)
        if np.any(d + radius <= self.radii + tol):
            return True
        return any(_seg_dist(p, a, b) + radius <= r + tol for a, b, r in self.caps)


def _seg_dist(p, a, b) -> float:
    ab = b - a
    den = float(ab @ ab)
    t = 0.0 if den == 0.0 else min(1.0, max(0.0, float((p - a) @ ab) / den))
    return float(np.linalg.norm(p - (a + t * ab)))


def _inflation(v: float, params: ControllerParams, reach: ReachParams, dt: float) -> float:
    return reach.link_radius + v * dt + 0.5 * params.a_max * dt * dt + reach.delta


def robot_occupancy(
    traj: TimedTrajectory, j: int, params: ControllerParams, reach: ReachParams
) -> Occupancy:
    """Occupancy of the robot over the interval [t_j, t_{j+1}]."""
    if not 0 <= j < len(traj) - 1:
        raise IndexError(f"interval {j} outside trajectory support [0, {len(traj) - 1})")
    sp = traj.speeds
    return _interval_occupancy(
        traj.positions[j], traj.positions[j + 1], sp[j], sp[j + 1], params, reach, traj.dt
    )


def _interval_occupancy(p0, p1, v0, v1, params, reach, dt) -> Occupancy:
    radii = [_inflation(v0, params, reach, dt), _inflation(v1, params, reach, dt)]
    chord = (np.asarray(p0, float), np.asarray(p1, float), reach.link_radius + reach.delta)
    return Occupancy(np.array([p0, p1]), radii, [chord])


def human_occupancy(keypoints, t_now: float, t_end: float, reach: ReachParams) -> Occupancy:
    kp = np.asarray(keypoints, dtype=float).reshape(-1, 3)
    if len(kp) == 0:
        raise ValueError("human occupancy needs at least one keypoint")
    if t_end < t_now:
        raise ValueError("interval ends before the current time")
    r = reach.body_radius + reach.v_h * (t_end - t_now)
    return Occupancy(kp, np.full(len(kp), r))


def check_intersection(a: Occupancy, b: Occupancy) -> bool:
    """Closed-set test: touching counts as intersecting."""
    d = np.linalg.norm(a.centers[:, None, :] - b.centers[None, :, :], axis=2)
    if np.any(d <= a.radii[:, None] + b.radii[None, :]):
        return True
    for p, q, r in a.caps:
        for c, rc in zip(b.centers, b.radii):
            if _seg_dist(c, p, q) <= r + rc:
                return True
    for p, q, r in b.caps:
        for c, rc in zip(a.centers, a.radii):
            if _seg_dist(c, p, q) <= r + rc:
                return True
    return False


# -- human motion -------------------------------------------------------------


class HumanStream(Protocol):
    def at(self, t: float) -> np.ndarray: ...


class StaticHuman:
    def __init__(self, keypoints):
        self.keypoints = np.asarray(keypoints, dtype=float).reshape(-1, 3)

    def at(self, t):
        return self.keypoints

    def at_many(self, ts):
        return np.broadcast_to(self.keypoints, (len(ts),) + self.keypoints.shape)


class ScriptedHuman:
    """Piecewise-linear keypoint motion through timed frames."""

    def __init__(self, times, frames):
        self.times = np.asarray(times, dtype=float)
        self.frames = np.asarray(frames, dtype=float)
        if len(self.times) != len(self.frames) or len(self.times) == 0:
            raise ValueError("need one keypoint frame per time stamp")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("script times must increase")

    def at(self, t):
        if t <= self.times[0]:
            return self.frames[0]
        if t >= self.times[-1]:
            return self.frames[-1]
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        f = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1 - f) * self.frames[i] + f * self.frames[i + 1]

    def at_many(self, ts):
        """Keypoints at every time in ``ts``, shape (len(ts), k, 3)."""
        ts = np.clip(np.asarray(ts, dtype=float), self.times[0], self.times[-1])
        i = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, max(len(self.times) - 2, 0))
        if len(self.times) == 1:
            return np.broadcast_to(self.frames[0], (len(ts),) + self.frames[0].shape)
        f = ((ts - self.times[i]) / (self.times[i + 1] - self.times[i]))[:, None, None]
        return (1 - f) * self.frames[i] + f * self.frames[i + 1]

    def max_speed(self) -> float:
        v = np.linalg.norm(np.diff(self.frames, axis=0), axis=2) / np.diff(self.times)[:, None]
        return float(v.max(initial=0.0))

    @classmethod
    def from_dict(cls, doc: dict) -> ScriptedHuman:
        return cls([f["t"] for f in doc["frames"]], [f["keypoints"] for f in doc["frames"]])


class RandomWalkHuman:
    """Rigid random walk of a keypoint set with speed never above ``speed``.

    The velocity is re-drawn every ``hold`` seconds, biased towards ``target``
    when one is given.
    """

    def __init__(self, keypoints, speed, rng, duration, hold=0.1, target=None, bias=0.5):
        kp = np.asarray(keypoints, dtype=float).reshape(-1, 3)
        n = int(math.ceil(duration / hold)) + 1
        offsets = [np.zeros(3)]
        for _ in range(n):
            d = rng.normal(size=3)
            d[2] *= 0.2
            if target is not None:
                to = np.asarray(target, dtype=float) - (kp.mean(axis=0) + offsets[-1])
                nt = np.linalg.norm(to)
                if nt > 1e-9:
                    d = (1 - bias) * d / max(np.linalg.norm(d), 1e-12) + bias * to / nt
            d /= max(np.linalg.norm(d), 1e-12)
            offsets.append(offsets[-1] + d * speed * rng.uniform(0.0, 1.0) * hold)
        self.base = kp
        self.script = ScriptedHuman(
            np.arange(n + 1) * hold, [kp + o for o in offsets]
        )

    def at(self, t):
        return self.script.at(t)

    def at_many(self, ts):
        return self.script.at_many(ts)


# -- verification -------------------------------------------------------------


@dataclass
class ShieldResult:
    trajectory: TimedTrajectory
    events: list
    mode: str

    def to_events_jsonl(self) -> str:
        import json

        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


def _cap(mode: str, params: ControllerParams) -> float:
    return 0.0 if mode == "stop" else params.v_contact_max


def _fragment(c: Cursor, path, params, cap, dt):
    """Cursors of the intended step followed by braking until speed <= cap."""
    out = [c, intended(c, path, params, dt)]
    for _ in range(int(math.ceil(params.v_max / (params.a_max * dt))) + 2):
        last = out[-1]
        if last.v <= cap or last.seg >= path.segments:
            break
        out.append(braking(last, path, params, cap, dt))
    return out


def _fragment_safe(frag, path, params, reach, cap, kp, dt) -> bool:
    v = np.array([c.v for c in frag])
    active = np.nonzero(np.maximum(v[:-1], v[1:]) > cap)[0]
    if len(active) == 0:
        return True
    pts = path.points([c.seg for c in frag], [c.s for c in frag])
    human_r = reach.body_radius + reach.v_h * (active + 1) * dt
    r0 = _inflation(v[active], params, reach, dt)
    r1 = _inflation(v[active + 1], params, reach, dt)
    # bounding ball of every sphere and chord in the fragment
    centre = pts[0]
    spread = np.sqrt(((pts - centre) ** 2).sum(axis=1)).max()
    bound = spread + max(r0.max(), r1.max(), reach.link_radius + reach.delta) + human_r[-1]
    if ((kp - centre) ** 2).sum(axis=1).min() > bound * bound:
        return True
    # the chord between two samples is at most v0*dt + a*dt^2/2 long, so the
    # sphere at its start already covers the swept capsule
    d0 = ((pts[active][:, None, :] - kp[None, :, :]) ** 2).sum(axis=2)
    d1 = ((pts[active + 1][:, None, :] - kp[None, :, :]) ** 2).sum(axis=2)
    hit = (d0 <= ((r0 + human_r) ** 2)[:, None]) | (d1 <= ((r1 + human_r) ** 2)[:, None])
    return not bool(hit.any())


def _far(c: Cursor, path, params, reach, kp, dt) -> bool:
    """Cheap sufficient condition for the whole fragment being safe.

    The fragment starts at speed ``c.v``, gains at most ``a_max * dt`` and
    then brakes, so it lasts at most ``steps`` intervals at speed ``vn``.
    """
    adt = params.a_max * dt
    vn = min(c.v + adt, params.v_max)
    steps = math.ceil(vn / adt) + 3
    reach_r = vn * dt * (steps + 1) + 0.5 * adt * dt + reach.link_radius + reach.delta
    human_r = reach.body_radius + reach.v_h * steps * dt
    p = path.point(c.seg, c.s)
    d = np.sqrt(((kp - p) ** 2).sum(axis=1))
    return bool(d.min() > reach_r + human_r)


def verify_and_scale(
    traj: TimedTrajectory,
    mode: str,
    params: ControllerParams,
    reach: ReachParams | None = None,
    human: HumanStream | None = None,
    max_duration: float = MAX_DURATION,
) -> ShieldResult:
    """Re-time ``traj`` along its path so that it is verified safe against ``human``.

    Events are recorded only for decisions that change the motion (and for
    every contact in compliant mode).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if traj.path is None:
        raise TrajectoryError("trajectory has no path to re-time")
    traj.check(params)
    reach = reach or ReachParams()
    path, dt = traj.path, traj.dt
    cap = _cap(mode, params)
    rec = Recorder(path, dt, float(traj.times[0]))
    c = skip_empty(path, Cursor(0, 0.0, 0.0))
    rec.add(0, c)
    events = []
    k = 0
    limit = int(round(max_duration / dt))
    while c.seg < path.segments and k < limit:
        t = float(traj.times[0]) + k * dt
        nxt = intended(c, path, params, dt)
        if human is not None:
            kp = np.asarray(human.at(t), dtype=float).reshape(-1, 3)
            force = None
            ok = _far(c, path, params, reach, kp, dt) or _fragment_safe(
                _fragment(c, path, params, cap, dt), path, params, reach, cap, kp, dt
            )
            if not ok:
                nxt = braking(c, path, params, cap, dt)
            if mode == "compliant":
                # predicted force after the step; stop pushing once it would exceed the limit
                force = _contact_force(path.point(nxt.seg, nxt.s), path.dirs, nxt, kp, params, reach)
                if force is not None and force > F_MAX:
                    nxt = braking(c, path, params, 0.0, dt)
            if not ok or force is not None:
                ev = {
                    "t": round(t, 10),
                    "mode": mode,
                    "intersect": not ok,
                    "v_before": c.v,
                    "v_after": nxt.v,
                }
                if force is not None:
                    ev["force"] = force
                events.append(ev)
        c = nxt
        k += 1
        rec.add(k, c)
    return ShieldResult(rec.build(c.seg >= path.segments), events, mode)


def _contact_force(p, dirs, c: Cursor, kp, params, reach) -> float | None:
    """Linear spring-damper force when the robot link penetrates the human body."""
    d = np.linalg.norm(kp - p, axis=1)
    i = int(np.argmin(d))
    pen = reach.link_radius + reach.body_radius - float(d[i])
    if pen <= 0:
        return None
    if c.seg < len(dirs) and d[i] > 0:
        toward = float(dirs[c.seg] @ (kp[i] - p)) / float(d[i])
    else:
        toward = 0.0
    approach = max(0.0, c.v * toward)
    return params.stiffness * pen + params.damping * approach


# -- oracle ----------------------------------------------------------------------


def dense_positions(traj: TimedTrajectory, j: int, n: int = 8) -> np.ndarray:
    """Robot points on [t_j, t_{j+1}] assuming constant acceleration between samples."""
    p0, p1 = traj.positions[j], traj.positions[j + 1]
    v0 = traj.velocities[j]
    dt = traj.dt
    acc = 2.0 * (p1 - p0 - v0 * dt) / (dt * dt)
    tau = np.linspace(0.0, dt, n)[:, None]
    return p0 + v0 * tau + 0.5 * acc * tau * tau


@dataclass
class SafetyReport:
    violations: int
    min_distance: float
    max_speed_in_contact: float
    steps: int


def audit(
    traj: TimedTrajectory, human: HumanStream, reach: ReachParams | None = None, n: int = 8
) -> SafetyReport:
    """Dense check of the executed motion against the true human motion.

    A violation is an interval where the robot moves (speed > 0 at either
    end) while the true robot and human bodies come within their combined
    radii. ``max_speed_in_contact`` is the largest sample speed on intervals
    where the bodies are that close.
    """
    reach = reach or ReachParams()
    combined = reach.link_radius + reach.body_radius
    sp = traj.speeds
    m = len(traj) - 1
    if m < 1:
        return SafetyReport(0, math.inf, 0.0, 0)
    tau = np.linspace(0.0, traj.dt, n)
    p0, p1, v0 = traj.positions[:-1], traj.positions[1:], traj.velocities[:-1]
    acc = 2.0 * (p1 - p0 - v0 * traj.dt) / (traj.dt * traj.dt)
    pts = p0[:, None] + v0[:, None] * tau[None, :, None] + 0.5 * acc[:, None] * (tau**2)[None, :, None]
    ts = (traj.times[:-1, None] + tau[None, :]).reshape(-1)
    if hasattr(human, "at_many"):
        hk = np.asarray(human.at_many(ts), dtype=float)
    else:
        hk = np.array([np.asarray(human.at(t), dtype=float).reshape(-1, 3) for t in ts])
    hk = hk.reshape(m, n, -1, 3)
    d = np.linalg.norm(hk - pts[:, :, None, :], axis=3).min(axis=(1, 2))
    close = d <= combined
    v = np.maximum(sp[:-1], sp[1:])
    violations = int(np.count_nonzero(close & (v > 0.0)))
    max_v = float(v[close].max(initial=0.0))
    return SafetyReport(violations, float(d.min()) - combined, max_v, m)
