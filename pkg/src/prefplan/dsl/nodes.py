"""AST node types for preference functions.

Nodes are immutable and compare structurally; the source location is carried
along for diagnostics but never takes part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Tuple

Loc = Tuple[int, int]

# Value kinds a node can produce.
STATE = "State"
ACTION = "Action"
POSE = "Pose"
METRIC = "Metric"
PROB = "Prob"
NUM = "Num"
STR = "Str"
BOOL = "Bool"
VEC3 = "Vec3"
AXES = "AxisList"


@dataclass(frozen=True)
class Node:
    loc: Loc = field(default=(0, 0), compare=False, repr=False, kw_only=True)

    kind = ""

    def children(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Node):
                yield v


# -- literals ---------------------------------------------------------------


@dataclass(frozen=True)
class Num(Node):
    value: float
    kind = NUM


@dataclass(frozen=True)
class Str(Node):
    value: str
    kind = STR


@dataclass(frozen=True)
class Bool(Node):
    value: bool
    kind = BOOL


@dataclass(frozen=True)
class Vector(Node):
    values: Tuple[float, ...]
    kind = VEC3


@dataclass(frozen=True)
class AxisNames(Node):
    names: Tuple[str, ...]
    kind = AXES


@dataclass(frozen=True)
class StateRef(Node):
    """``state``: the state the action is applied in."""

    kind = STATE


@dataclass(frozen=True)
class PredictNext(Node):
    """``next_state``: the predicted successor after applying the action."""

    kind = STATE


@dataclass(frozen=True)
class ActionRef(Node):
    kind = ACTION


# -- building blocks ----------------------------------------------------------


@dataclass(frozen=True)
class GetPose(Node):
    state: Node
    obj: Str
    frame: Str
    kind = POSE


@dataclass(frozen=True)
class PositionNorm(Node):
    pose_1: Node
    pose_2: Node
    norm: Str
    axis: AxisNames
    kind = METRIC


@dataclass(frozen=True)
class GreatCircleDistance(Node):
    pose_1: Node
    pose_2: Node
    kind = METRIC


@dataclass(frozen=True)
class PointingInDirection(Node):
    pose_1: Node
    pose_2: Node
    main_axis: Vector
    kind = METRIC


@dataclass(frozen=True)
class RotationAngle(Node):
    pose_1: Node
    pose_2: Node
    axis: Vector
    kind = METRIC


@dataclass(frozen=True)
class Threshold(Node):
    metric: Node
    t: Num
    direction: Bool
    kind = PROB


@dataclass(frozen=True)
class Linear(Node):
    metric: Node
    t_1: Num
    t_2: Num
    direction: Bool
    kind = PROB


@dataclass(frozen=True)
class Normal(Node):
    metric: Node
    mean: Num
    std_dev: Num
    direction: Bool
    kind = PROB


@dataclass(frozen=True)
class And(Node):
    prob_1: Node
    prob_2: Node
    kind = PROB


@dataclass(frozen=True)
class Or(Node):
    prob_1: Node
    prob_2: Node
    kind = PROB


def walk(node: Node):
    yield node
    for child in node.children():
        yield from walk(child)
