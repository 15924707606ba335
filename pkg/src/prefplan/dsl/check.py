"""Scene-aware validation: names must resolve and literals must be in range."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from prefplan.dsl import nodes as n
from prefplan.geometry import AXIS_INDEX, NORMS


@dataclass(frozen=True)
class Catalog:
    """Names a preference function may refer to."""

    objects: frozenset[str]
    frames: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "objects", frozenset(self.objects))
        object.__setattr__(
            self, "frames", frozenset(self.frames) | self.objects | {"world"}
        )


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "unknown object" | "unknown frame" | "range violation"
    message: str
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}: {self.kind}: {self.message}"


class DslCheckError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


def _finite(node: n.Num, out: list, what: str):
    if not math.isfinite(node.value):
        out.append(Diagnostic("range violation", f"{what} must be finite", *node.loc))
        return False
    return True


def diagnose(ast: n.Node, catalog: Catalog | None = None) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    _visit(ast, catalog, out, expect=n.PROB)
    return out


def _visit(node: n.Node, catalog, out, expect=None):
    loc = node.loc
    if isinstance(node, n.Num):
        if _finite(node, out, "numeric literal"):
            if expect == n.PROB and not 0.0 <= node.value <= 1.0:
                out.append(
                    Diagnostic(
                        "range violation", f"probability {node.value!r} not in [0, 1]", *loc
                    )
                )
            if expect == n.METRIC and node.value < 0.0:
                out.append(
                    Diagnostic("range violation", f"metric {node.value!r} is negative", *loc)
                )
        return
    if isinstance(node, n.GetPose):
        if catalog is not None:
            if node.obj.value not in catalog.objects:
                out.append(
                    Diagnostic("unknown object", f"{node.obj.value!r}", *node.obj.loc)
                )
            if node.frame.value not in catalog.frames:
                out.append(
                    Diagnostic("unknown frame", f"{node.frame.value!r}", *node.frame.loc)
                )
        return
    if isinstance(node, n.PositionNorm):
        if node.norm.value not in NORMS:
            out.append(
                Diagnostic(
                    "range violation",
                    f"norm {node.norm.value!r} not one of {', '.join(NORMS)}",
                    *node.norm.loc,
                )
            )
        axes = node.axis.names
        if not axes:
            out.append(Diagnostic("range violation", "axis list is empty", *node.axis.loc))
        bad = [a for a in axes if a not in AXIS_INDEX]
        if bad:
            out.append(
                Diagnostic("range violation", f"unknown axes {bad}", *node.axis.loc)
            )
        elif len(set(axes)) != len(axes):
            out.append(
                Diagnostic("range violation", "duplicate axis names", *node.axis.loc)
            )
    if isinstance(node, (n.PointingInDirection, n.RotationAngle)):
        vec = node.main_axis if isinstance(node, n.PointingInDirection) else node.axis
        norm = math.sqrt(sum(v * v for v in vec.values))
        if not math.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            out.append(
                Diagnostic("range violation", f"axis {list(vec.values)} is not unit length", *vec.loc)
            )
    if isinstance(node, n.Threshold):
        _finite(node.t, out, "threshold")
    if isinstance(node, n.Linear):
        ok = _finite(node.t_1, out, "t_1") & _finite(node.t_2, out, "t_2")
        if ok and not node.t_1.value < node.t_2.value:
            out.append(
                Diagnostic(
                    "range violation",
                    f"linear() needs t_1 < t_2, got {node.t_1.value!r} >= {node.t_2.value!r}",
                    *node.t_1.loc,
                )
            )
    if isinstance(node, n.Normal):
        _finite(node.mean, out, "mean")
        if _finite(node.std_dev, out, "std_dev") and not node.std_dev.value > 0.0:
            out.append(
                Diagnostic(
                    "range violation",
                    f"normal() needs std_dev > 0, got {node.std_dev.value!r}",
                    *node.std_dev.loc,
                )
            )

    if isinstance(node, (n.Threshold, n.Linear, n.Normal)):
        _visit(node.metric, catalog, out, expect=n.METRIC)
        return
    if isinstance(node, (n.And, n.Or)):
        _visit(node.prob_1, catalog, out, expect=n.PROB)
        _visit(node.prob_2, catalog, out, expect=n.PROB)
        return
    for child in node.children():
        _visit(child, catalog, out)


def typecheck(ast: n.Node, catalog: Catalog | None = None) -> n.Node:
    """Return ``ast`` unchanged if it is valid for ``catalog``; raise otherwise."""
    diagnostics = diagnose(ast, catalog)
    if diagnostics:
        raise DslCheckError(diagnostics)
    return ast
