"""Simulated tabletop: state, primitives, transitions and feasibility."""

from prefplan.world.primitives import (
    ACTION_DIMS,
    HANDOVER,
    PICK,
    PLACE,
    Outcome,
    PreconditionError,
    Primitive,
    bounds,
    check_preconditions,
    feasibility,
    sample_action,
    step,
    to_physical,
    transition,
)
from prefplan.world.scenario import (
    Scenario,
    ScenarioError,
    jittered,
    load_scenario,
    primitive_catalog,
)
from prefplan.world.shapes import Box, Composite, Cylinder, Shape
from prefplan.world.state import Body, Human, Robot, Surface, Workspace, WorldState, separation

__all__ = [
    "ACTION_DIMS",
    "Body",
    "Box",
    "Composite",
    "Cylinder",
    "HANDOVER",
    "Human",
    "Outcome",
    "PICK",
    "PLACE",
    "PreconditionError",
    "Primitive",
    "Robot",
    "Scenario",
    "ScenarioError",
    "Shape",
    "Surface",
    "Workspace",
    "WorldState",
    "bounds",
    "check_preconditions",
    "feasibility",
    "jittered",
    "load_scenario",
    "primitive_catalog",
    "sample_action",
    "separation",
    "step",
    "to_physical",
    "transition",
]
