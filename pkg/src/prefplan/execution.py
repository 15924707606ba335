"""Simulated execution of planned skills through the safety shield.

Each skill becomes a rest-to-rest end-effector path: pick and place
approach from above, descend, and retreat upwards; a handover moves
straight to the handover pose. The shield re-times every path against the
human stream, then a dense audit measures distances on the result.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from prefplan import world
from prefplan.safety import (
    DT,
    ReachParams,
    ScriptedHuman,
    StaticHuman,
    audit,
    plan_trajectory,
    preset,
    verify_and_scale,
)
from prefplan.safety.params import Control

APPROACH = 0.10


class ExecutionError(ValueError):
    pass


def skill_waypoints(kind: str, start: np.ndarray, start_q, goal: world.WorldState):
    """Waypoints and orientations from ``start`` to the skill's end-effector pose in ``goal``."""
    # after pick or handover the gripper holds the object; after place it sits at the release pose
    ee = goal.robot.ee_pose
    target, q = ee.position, ee.orientation
    if kind == world.HANDOVER:
        return [start, target], [start_q, q]
    above = target + [0.0, 0.0, APPROACH]
    return [start, above, target, above], [start_q, q, q, q]


@dataclass
class StepReport:
    primitive: str
    control: str
    duration: float
    events: list
    min_distance: float
    max_speed_in_contact: float
    violations: int
    completed: bool


@dataclass
class ExecReport:
    steps: list[StepReport]
    samples: list = field(repr=False, default_factory=list)
    events: list = field(repr=False, default_factory=list)

    @property
    def duration(self) -> float:
        return math.fsum(s.duration for s in self.steps)

    @property
    def min_distance(self) -> float:
        return min((s.min_distance for s in self.steps), default=math.inf)

    @property
    def max_speed_in_contact(self) -> float:
        return max((s.max_speed_in_contact for s in self.steps), default=0.0)

    def summary(self) -> str:
        d = "inf" if math.isinf(self.min_distance) else f"{self.min_distance:.4f}"
        return (
            f"steps={len(self.steps)} duration={self.duration:.2f}s events={len(self.events)} "
            f"min_distance={d}m max_speed_under_intersection={self.max_speed_in_contact:.4f}m/s"
        )

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "min_distance": None if math.isinf(self.min_distance) else self.min_distance,
            "max_speed_in_contact": self.max_speed_in_contact,
            "steps": [
                {
                    "primitive": s.primitive,
                    "control": s.control,
                    "duration": s.duration,
                    "events": len(s.events),
                    "min_distance": None if math.isinf(s.min_distance) else s.min_distance,
                    "max_speed_in_contact": s.max_speed_in_contact,
                    "violations": s.violations,
                    "completed": s.completed,
                }
                for s in self.steps
            ],
            "samples": self.samples,
        }

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


def load_human_script(path) -> ScriptedHuman:
    """``{"frames": [{"t": seconds, "keypoints": [[x, y, z], ...]}, ...]}``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return ScriptedHuman.from_dict(doc)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ExecutionError(f"{path}: bad human script: {e}") from e


def load_plan_steps(doc: dict) -> list[tuple[world.Primitive, np.ndarray, Control]]:
    """Executed skills from a plan document written by the ``plan`` command."""
    try:
        out = []
        for s in doc["executed"]:
            c = s.get("control")
            ctrl = Control(c["mode"], c["preset"]) if c else Control()
            out.append((world.Primitive.parse(s["primitive"]), np.asarray(s["action"], dtype=float), ctrl))
    except (KeyError, TypeError, ValueError) as e:
        raise ExecutionError(f"invalid plan document: {e}") from e
    if not out:
        raise ExecutionError("plan document has no executed steps")
    return out


def execute(state, steps, mode: str | None = None, preset_name: str | None = None, human=None,
            reach: ReachParams | None = None, dt: float = DT) -> ExecReport:
    """Run the skills in order; ``mode``/``preset_name`` override each skill's control."""
    reach = reach or ReachParams()
    if human is None and state.human is not None:
        human = StaticHuman(state.human.keypoints)
    pos = np.asarray(state.robot.ee_pose.position, dtype=float)
    q = np.asarray(state.robot.ee_pose.orientation, dtype=float)
    t = 0.0
    reports, samples, events = [], [], []
    for prim, action, ctrl in steps:
        try:
            nxt = world.transition(state, prim, action)
        except world.PreconditionError as e:
            raise ExecutionError(f"{prim}: {e}") from e
        m = mode or ctrl.mode
        params = preset(preset_name or ctrl.preset)
        wps, qs = skill_waypoints(prim.kind, pos, q, nxt)
        traj = plan_trajectory(wps, params, qs, dt, t)
        if human is not None:
            res = verify_and_scale(traj, m, params, reach, human)
            traj, evs = res.trajectory, res.events
            rep = audit(traj, human, reach)
            dist, vmax, viol = rep.min_distance, rep.max_speed_in_contact, rep.violations
        else:
            evs, dist, vmax, viol = [], math.inf, 0.0, 0
        for e in evs:
            events.append(dict(e, step=len(reports)))
        for tt, p, o, v in zip(traj.times, traj.positions, traj.orientations, traj.velocities):
            samples.append(
                {"t": float(tt), "step": len(reports), "position": p.tolist(),
                 "orientation": o.tolist(), "velocity": v.tolist()}
            )
        reports.append(
            StepReport(str(prim), f"{m} {params.preset}", traj.duration, evs, dist, vmax, viol, traj.completed)
        )
        pos, q = traj.positions[-1], traj.orientations[-1]
        t = float(traj.times[-1]) + dt
        state = nxt
    return ExecReport(reports, samples, events)
