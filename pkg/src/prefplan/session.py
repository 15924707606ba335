"""Glue between the language gateway and the planner.

A session turns an instruction into the two callbacks ``plan_and_execute``
needs: a skeleton source (full plan with preferences for the current state)
and a candidate source (next-step proposals for a greedy step).
"""

from __future__ import annotations

import hashlib
from importlib import resources
from pathlib import Path

import numpy as np

from prefplan.llm import (
    GatewayError,
    build_candidate_prompt,
    build_prompt,
    parse_response,
    request_candidates,
    request_plan,
    select_examples,
    validate,
)
from prefplan.planner import PlanningError, Skeleton

EXAMPLES_PER_PROMPT = 3


def data_path(*parts) -> Path:
    """Path of a file shipped in the package data directory."""
    return Path(str(resources.files("prefplan").joinpath("data", *parts)))


def default_suite_path() -> Path:
    return data_path("suite", "ablation.json")


def default_fixtures() -> Path:
    return data_path("fixtures")


def example_pool():
    from prefplan.ablation import load_suite

    return load_suite(default_suite_path()).examples


def instruction_examples(instruction: str, pool, k: int = EXAMPLES_PER_PROMPT):
    """``k`` examples chosen by a generator seeded from the instruction text.

    Independent of the planner seed, so recorded prompts replay under any seed.
    """
    digest = hashlib.sha256(instruction.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return select_examples(pool, "", k, rng)


def skeleton_from_response(resp) -> Skeleton:
    return Skeleton(tuple(resp.primitives), tuple(resp.preferences), tuple(resp.controls))


def load_plan_file(path, state) -> Skeleton:
    """Fixed skeleton from a file in the answer block format (PLAN, CONTROL, PREF[t])."""
    text = Path(path).read_text(encoding="utf-8")
    resp = parse_response(text)
    diags = validate(resp, state)
    if diags:
        raise GatewayError(f"{path}: " + "; ".join(diags), [text], diags)
    return skeleton_from_response(resp)


class LanguageSession:
    """Instruction-driven skeleton and candidate sources over one transport."""

    def __init__(self, instruction: str, transport, examples=None, fixed: Skeleton | None = None):
        self.instruction = instruction
        self.transport = transport
        self.examples = list(examples) if examples is not None else instruction_examples(
            instruction, example_pool()
        )
        self.fixed = fixed
        self.responses = []

    def skeleton(self, state) -> Skeleton:
        if self.fixed is not None:
            return self.fixed
        prompt = build_prompt(state, self.instruction, self.examples)
        resp = request_plan(prompt, self.transport, state)
        self.responses.append(resp.text)
        return skeleton_from_response(resp)

    def candidates(self, state, budget: int):
        if self.transport is None:
            # a fixed plan without an instruction has nothing to fall back on
            raise PlanningError("objective is zero and there is no instruction to ask for candidates")
        prompt = build_candidate_prompt(state, self.instruction, self.examples, budget)
        return request_candidates(prompt, budget, self.transport, state)
