"""Parsing of model answers: labeled fenced blocks into plans and candidates."""

from __future__ import annotations

import re
from dataclasses import dataclass

from prefplan.dsl import parse
from prefplan.dsl.nodes import Node
from prefplan.safety.params import Control
from prefplan.world.primitives import Primitive

_BLOCK_RE = re.compile(r"^```[ \t]*([A-Z]+(?:\[\d+\])?)[ \t]*\n(.*?)^```[ \t]*$", re.M | re.S)


class ResponseError(ValueError):
    """Structured parse error naming the offending block."""

    def __init__(self, block: str, message: str):
        self.block = block
        super().__init__(f"{block}: {message}")


def blocks(text: str) -> dict[str, str]:
    """Label -> body of every fenced block; a repeated label is an error."""
    out: dict[str, str] = {}
    for m in _BLOCK_RE.finditer(text.replace("\r\n", "\n")):
        label, body = m.group(1), m.group(2)
        if label in out:
            raise ResponseError(label, "block appears more than once")
        out[label] = body.strip("\n")
    return out


def _lines(body: str) -> list[str]:
    return [ln.strip() for ln in body.splitlines() if ln.strip() and not ln.strip().startswith("#")]


@dataclass
class PlanResponse:
    primitives: list[Primitive]
    controls: list[Control]
    sources: list[str]
    preferences: list[Node]
    text: str
    raw_scores: list[float] | None = None

    def __len__(self):
        return len(self.primitives)


def _primitives(label: str, body: str) -> list[Primitive]:
    out = []
    for ln in _lines(body):
        try:
            out.append(Primitive.parse(ln))
        except ValueError as e:
            raise ResponseError(label, str(e)) from e
    if not out:
        raise ResponseError(label, "block is empty")
    return out


def _controls(body: str) -> list[Control]:
    out = []
    for ln in _lines(body):
        try:
            out.append(Control.parse(ln))
        except ValueError as e:
            raise ResponseError("CONTROL", str(e)) from e
    return out


def _prefs(found: dict, count: int) -> list[str]:
    extra = sorted(k for k in found if k.startswith("PREF[") and not 1 <= int(k[5:-1]) <= count)
    if extra:
        raise ResponseError(extra[0], f"only {count} steps in the plan")
    out = []
    for i in range(1, count + 1):
        label = f"PREF[{i}]"
        if label not in found:
            raise ResponseError(label, "missing block")
        out.append(found[label].strip())
    return out


def parse_response(text: str, head: str = "PLAN") -> PlanResponse:
    """Parse a plan answer (``head='PLAN'``) or a candidate answer (``'CANDIDATES'``).

    Only syntax is checked here; scene-specific checks happen in the gateway.
    """
    found = blocks(text)
    for label in (head, "CONTROL"):
        if label not in found:
            raise ResponseError(label, "missing block")
    prims = _primitives(head, found[head])
    controls = _controls(found["CONTROL"])
    if len(controls) != len(prims):
        raise ResponseError("CONTROL", f"{len(controls)} lines for {len(prims)} steps")
    sources = _prefs(found, len(prims))
    asts = []
    for i, src in enumerate(sources, 1):
        try:
            asts.append(parse(src))
        except Exception as e:
            raise ResponseError(f"PREF[{i}]", str(e)) from e
    return PlanResponse(prims, controls, sources, asts, text)
