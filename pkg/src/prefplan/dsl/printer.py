"""Canonical pretty-printer: ``parse(pretty(ast)) == ast`` for every valid tree."""

from __future__ import annotations

from prefplan.dsl import nodes as n
from prefplan.dsl.parser import SIGNATURE_BY_NODE


def _num(v: float) -> str:
    # repr() is the shortest string that round-trips exactly
    return repr(float(v))


def pretty(node: n.Node) -> str:
    if isinstance(node, n.Num):
        return _num(node.value)
    if isinstance(node, n.Str):
        return repr(node.value) if "'" not in node.value else f'"{node.value}"'
    if isinstance(node, n.Bool):
        return "true" if node.value else "false"
    if isinstance(node, n.Vector):
        return "[" + ", ".join(_num(v) for v in node.values) + "]"
    if isinstance(node, n.AxisNames):
        return "[" + ", ".join(repr(a) for a in node.names) + "]"
    if isinstance(node, n.StateRef):
        return "state"
    if isinstance(node, n.PredictNext):
        return "next_state"
    if isinstance(node, n.ActionRef):
        return "action"
    sig = SIGNATURE_BY_NODE[type(node)]
    parts = []
    for p in sig.params:
        text = pretty(getattr(node, p.name))
        parts.append(text if p.default is None else f"{p.name}={text}")
    return f"{sig.name}({', '.join(parts)})"

