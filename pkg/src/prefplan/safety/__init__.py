"""Reachability-based safety shield and controller presets."""

from prefplan.safety.params import (
    BODY_RADIUS,
    DT,
    F_MAX,
    HUMAN_SPEED,
    LINK_RADIUS,
    MODES,
    PRESETS,
    Control,
    ControllerParams,
    preset,
)
from prefplan.safety.shield import (
    Occupancy,
    RandomWalkHuman,
    ReachParams,
    SafetyReport,
    ScriptedHuman,
    ShieldResult,
    StaticHuman,
    audit,
    check_intersection,
    dense_positions,
    human_occupancy,
    robot_occupancy,
    verify_and_scale,
)
from prefplan.safety.trajectory import Path, TimedTrajectory, TrajectoryError, plan_trajectory

__all__ = [
    "BODY_RADIUS",
    "Control",
    "ControllerParams",
    "DT",
    "F_MAX",
    "HUMAN_SPEED",
    "LINK_RADIUS",
    "MODES",
    "Occupancy",
    "PRESETS",
    "Path",
    "RandomWalkHuman",
    "ReachParams",
    "SafetyReport",
    "ScriptedHuman",
    "ShieldResult",
    "StaticHuman",
    "TimedTrajectory",
    "TrajectoryError",
    "audit",
    "check_intersection",
    "dense_positions",
    "human_occupancy",
    "plan_trajectory",
    "preset",
    "robot_occupancy",
    "verify_and_scale",
]
