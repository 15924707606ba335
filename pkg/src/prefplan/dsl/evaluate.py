"""Evaluation of preference functions against a (state, action) pair."""

from __future__ import annotations

import math
from typing import Any, Callable

from prefplan import geometry as geo
from prefplan.dsl import nodes as n


class DslEvalError(Exception):
    """A metric or lookup failed while evaluating; never silently mapped to 0."""


_SQRT2 = math.sqrt(2.0)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


class EvalContext:
    """Current state, the action under evaluation and a successor predictor.

    ``predict`` is called at most once; the successor is cached.
    """

    def __init__(self, state, action=None, predict: Callable[[], Any] | None = None):
        self.state = state
        self.action = action
        self._predict = predict
        self._next = None
        self.predict_calls = 0

    @property
    def next_state(self):
        if self._next is None:
            if self._predict is None:
                raise DslEvalError("next_state used but no transition predictor given")
            self.predict_calls += 1
            self._next = self._predict()
        return self._next


def _threshold(m: float, t: float, up: bool) -> float:
    hit = 1.0 if m >= t else 0.0
    return hit if up else 1.0 - hit


def _linear(m: float, t1: float, t2: float, up: bool) -> float:
    if m < t1:
        v = 0.0
    elif m >= t2:
        v = 1.0
    else:
        v = (m - t1) / (t2 - t1)
    return v if up else 1.0 - v


def _normal(m: float, mu: float, sigma: float, up: bool) -> float:
    z = (m - mu) / sigma
    # the flipped branch uses the symmetric tail so both sides keep full precision
    return normal_cdf(z) if up else normal_cdf(-z)


def evaluate(ast: n.Node, ctx: EvalContext) -> float:
    """Probability in [0, 1] that the user approves ``ctx``'s action."""
    return float(_eval(ast, ctx))


def _eval(node: n.Node, ctx: EvalContext):
    if isinstance(node, n.Num):
        return node.value
    if isinstance(node, n.StateRef):
        return ctx.state
    if isinstance(node, n.PredictNext):
        return ctx.next_state
    if isinstance(node, n.GetPose):
        state = _eval(node.state, ctx)
        try:
            pose = state.pose_of(node.obj.value)
            if node.frame.value == "world":
                return pose
            return geo.relative(state.pose_of(node.frame.value), pose)
        except KeyError as e:
            raise DslEvalError(f"unknown object or frame {e.args[0]!r}") from None
    try:
        if isinstance(node, n.PositionNorm):
            return geo.position_norm(
                _eval(node.pose_1, ctx), _eval(node.pose_2, ctx), node.norm.value, node.axis.names
            )
        if isinstance(node, n.GreatCircleDistance):
            return geo.great_circle_distance(_eval(node.pose_1, ctx), _eval(node.pose_2, ctx))
        if isinstance(node, n.PointingInDirection):
            return geo.pointing_in_direction(
                _eval(node.pose_1, ctx), _eval(node.pose_2, ctx), node.main_axis.values
            )
        if isinstance(node, n.RotationAngle):
            return geo.rotation_angle(
                _eval(node.pose_1, ctx), _eval(node.pose_2, ctx), node.axis.values
            )
    except geo.GeometryError as e:
        raise DslEvalError(str(e)) from e
    if isinstance(node, n.Threshold):
        return _threshold(_eval(node.metric, ctx), node.t.value, node.direction.value)
    if isinstance(node, n.Linear):
        return _linear(
            _eval(node.metric, ctx), node.t_1.value, node.t_2.value, node.direction.value
        )
    if isinstance(node, n.Normal):
        return _normal(
            _eval(node.metric, ctx), node.mean.value, node.std_dev.value, node.direction.value
        )
    if isinstance(node, n.And):
        return _eval(node.prob_1, ctx) * _eval(node.prob_2, ctx)
    if isinstance(node, n.Or):
        p1 = _eval(node.prob_1, ctx)
        p2 = _eval(node.prob_2, ctx)
        return p1 * p2 + p1 * (1.0 - p2) + p2 * (1.0 - p1)
    raise DslEvalError(f"cannot evaluate {type(node).__name__}")
