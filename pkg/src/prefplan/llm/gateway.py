"""Validated plan and greedy-candidate requests with diagnostic re-prompting."""

from __future__ import annotations

import logging

import numpy as np

from prefplan.llm.prompt import PromptBundle, check_preferences
from prefplan.llm.response import PlanResponse, ResponseError, parse_response
from prefplan.planner import Candidate

log = logging.getLogger(__name__)

RETRIES = 3


class GatewayError(Exception):
    """No valid answer within the retry budget; carries every raw answer."""

    def __init__(self, message: str, attempts: list[str], diagnostics: list[str]):
        self.attempts = attempts
        self.diagnostics = diagnostics
        super().__init__(message)


def softmax(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("softmax of an empty score list")
    e = np.exp(s - s.max())
    return e / e.sum()


def validate(resp: PlanResponse, state) -> list[str]:
    """Scene checks: every argument resolves and every preference typechecks."""
    out = []
    for i, p in enumerate(resp.primitives, 1):
        if p.obj not in state.objects:
            out.append(f"step {i}: unknown object {p.obj!r}")
        if p.surface is not None and p.surface not in state.surfaces:
            out.append(f"step {i}: unknown surface {p.surface!r}")
        if p.kind == "static_handover" and state.human is None:
            out.append(f"step {i}: no person to hand over to")
    out += check_preferences(resp.sources, state.catalog())
    return out


def _request(prompt: PromptBundle, transport, state, head: str, retries: int, logprobs: bool):
    attempts, diags = [], []
    for attempt in range(retries):
        completion = transport.complete(prompt, logprobs=logprobs)
        attempts.append(completion.text)
        try:
            resp = parse_response(completion.text, head)
            diags = validate(resp, state)
        except ResponseError as e:
            resp, diags = None, [str(e)]
        if not diags:
            resp.raw_scores = None if completion.candidate_scores is None else list(completion.candidate_scores)
            return resp
        log.info("attempt %d rejected: %s", attempt + 1, "; ".join(diags))
        prompt = prompt.with_feedback(completion.text, diags)
    raise GatewayError(
        f"no valid answer after {retries} attempts: {'; '.join(diags)}", attempts, diags
    )


def request_plan(prompt: PromptBundle, transport, state, retries: int = RETRIES) -> PlanResponse:
    return _request(prompt, transport, state, "PLAN", retries, False)


def request_candidates(
    prompt: PromptBundle, budget: int, transport, state, retries: int = RETRIES
) -> list[Candidate]:
    """At most ``budget`` candidates, highest raw log-prob first, with softmax S_task.

    Truncation to the top ``budget`` happens before normalization, so the
    returned probabilities sum to one.
    """
    if budget < 1:
        raise ValueError("candidate budget must be at least 1")
    resp = _request(prompt, transport, state, "CANDIDATES", retries, True)
    raw = resp.raw_scores
    if raw is None or len(raw) != len(resp):
        raise ResponseError("CANDIDATES", "answer carries no per-candidate log-probabilities")
    order = sorted(range(len(raw)), key=lambda i: (-raw[i], i))[:budget]
    probs = softmax([raw[i] for i in order])
    return [
        Candidate(resp.primitives[i], float(p), resp.preferences[i], resp.controls[i])
        for i, p in zip(order, probs)
    ]
