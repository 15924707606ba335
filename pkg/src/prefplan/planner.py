"""Preference-aware planning: shooting with CEM refinement, greedy fallback, execute loop.

The objective of a skill sequence is

    c_task * c_ctrl * prod_t F_t(s_t, a_t) * Q_t(s_t, a_t)

with s_{t+1} the deterministic successor of (s_t, a_t). Baseline agents
swap the product for a sum of (Q_t + F_t) or drop F entirely; everything else
(sampler, CEM, tie-breaking) is shared.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from prefplan import world
from prefplan.dsl import EvalContext, evaluate, pretty
from prefplan.dsl.nodes import Node
from prefplan.safety.params import Control

log = logging.getLogger(__name__)

MAX_GREEDY = 5
PRODUCT = "product"
SUM = "sum"


class PlanningError(Exception):
    pass


class StepError(PlanningError):
    """A transition precondition failed part-way through a rollout."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"step {index}: {cause}")


class PlanningFailed(PlanningError):
    def __init__(self, message: str, trace: list):
        self.trace = trace
        super().__init__(message)


@dataclass(frozen=True)
class PlannerConfig:
    samples: int = 1024
    elite_frac: float = 0.1
    cem_iters: int = 4
    smoothing: float = 0.5
    seed: int = 0
    epsilon: float = 1e-6
    c_task: float = 1.0
    c_ctrl: float = 1.0
    candidates: int = 3
    max_greedy: int = MAX_GREEDY
    min_std: float = 1e-3

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0.0 < self.elite_frac <= 1.0:
            raise ValueError("elite_frac must lie in (0, 1]")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        for k in ("c_task", "c_ctrl"):
            if not 0.0 < getattr(self, k) <= 1.0:
                raise ValueError(f"{k} must lie in (0, 1]")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must lie in [0, 1)")
        if self.cem_iters < 0 or self.candidates < 1:
            raise ValueError("cem_iters must be >= 0 and candidates >= 1")

    @property
    def scale(self) -> float:
        return self.c_task * self.c_ctrl


@dataclass(frozen=True)
class Skeleton:
    """Primitive sequence with one preference function and one controller per step.

    A preference of ``None`` is the constant 1.
    """

    primitives: tuple[world.Primitive, ...]
    preferences: tuple[Node | None, ...]
    controls: tuple[Control, ...] = ()

    def __post_init__(self):
        prims = tuple(self.primitives)
        prefs = tuple(self.preferences)
        ctrls = tuple(self.controls) or tuple(Control() for _ in prims)
        if not prims:
            raise ValueError("a skeleton needs at least one step")
        if not len(prims) == len(prefs) == len(ctrls):
            raise ValueError(
                f"length mismatch: {len(prims)} primitives, {len(prefs)} preferences, "
                f"{len(ctrls)} controls"
            )
        object.__setattr__(self, "primitives", prims)
        object.__setattr__(self, "preferences", prefs)
        object.__setattr__(self, "controls", ctrls)

    def __len__(self):
        return len(self.primitives)

    @property
    def dims(self) -> list[int]:
        return [p.dim for p in self.primitives]

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        return np.split(np.asarray(flat, dtype=float), np.cumsum(self.dims)[:-1])

    def with_preferences(self, prefs) -> Skeleton:
        return Skeleton(self.primitives, tuple(prefs), self.controls)


@dataclass(frozen=True)
class Skill:
    primitive: world.Primitive
    action: np.ndarray
    control: Control

    @property
    def params(self):
        return self.control.params


@dataclass
class ScoreRecord:
    c_task: float
    c_ctrl: float
    q: list[float]
    f: list[float]
    product: float
    states: list
    hard_ok: list[bool]
    outcomes: list = field(default_factory=list, repr=False)

    @property
    def sum_score(self) -> float:
        return float(sum(self.q) + sum(self.f))


def _pref_value(pref, state, action, outcome) -> float:
    if pref is None:
        return 1.0
    return evaluate(pref, EvalContext(state, action, lambda: outcome.next_state))


def score_plan(state, skeleton: Skeleton, actions: Sequence, config: PlannerConfig | None = None):
    """Full factor decomposition of a fixed action sequence."""
    config = config or PlannerConfig()
    if len(actions) != len(skeleton):
        raise ValueError(f"{len(actions)} actions for a {len(skeleton)}-step skeleton")
    states, qs, fs, ok, outs = [state], [], [], [], []
    s = state
    for t, (prim, pref, a) in enumerate(zip(skeleton.primitives, skeleton.preferences, actions)):
        try:
            out = world.step(s, prim, a)
        except world.PreconditionError as e:
            raise StepError(t, e) from e
        qs.append(out.q)
        fs.append(_pref_value(pref, s, a, out))
        ok.append(out.hard_ok)
        outs.append(out)
        s = out.next_state
        states.append(s)
    product = config.scale * math.prod(f * q for f, q in zip(fs, qs))
    return ScoreRecord(config.c_task, config.c_ctrl, qs, fs, product, states, ok, outs)


def _objective(state, skeleton: Skeleton, actions, scale: float, scoring: str) -> float:
    """Rollout value of one flat action vector; product scoring stops at the first zero."""
    s = state
    total = scale if scoring == PRODUCT else 0.0
    for t, (prim, pref, a) in enumerate(zip(skeleton.primitives, skeleton.preferences, actions)):
        try:
            out = world.step(s, prim, a)
        except world.PreconditionError as e:
            raise StepError(t, e) from e
        if scoring == PRODUCT:
            if out.q == 0.0:
                return 0.0
            total *= out.q * _pref_value(pref, s, a, out)
            if total == 0.0:
                return 0.0
        else:
            total += out.q + _pref_value(pref, s, a, out)
        s = out.next_state
    return total


@dataclass
class PlanResult:
    skeleton: Skeleton
    actions: list[np.ndarray]
    record: ScoreRecord
    objective: float
    scoring: str = PRODUCT
    evaluations: int = 0
    elapsed: float = 0.0
    history: list[float] = field(default_factory=list)

    @property
    def q(self):
        return self.record.q

    @property
    def f(self):
        return self.record.f

    @property
    def states(self):
        return self.record.states

    def skills(self) -> list[Skill]:
        return [
            Skill(p, a, c)
            for p, a, c in zip(self.skeleton.primitives, self.actions, self.skeleton.controls)
        ]

    def to_dict(self, timing: bool = False) -> dict:
        steps = []
        for t, (prim, pref, ctrl) in enumerate(
            zip(self.skeleton.primitives, self.skeleton.preferences, self.skeleton.controls)
        ):
            s = self.states[t]
            steps.append(
                {
                    "primitive": str(prim),
                    "action": [float(v) for v in self.actions[t]],
                    "physical": [float(v) for v in world.to_physical(s, prim, self.actions[t])],
                    "control": {"mode": ctrl.mode, "preset": ctrl.preset},
                    "preference": None if pref is None else pretty(pref),
                    "q": self.record.q[t],
                    "f": self.record.f[t],
                    "hard_ok": self.record.hard_ok[t],
                }
            )
        out = {
            "scoring": self.scoring,
            "objective": self.objective,
            "c_task": self.record.c_task,
            "c_ctrl": self.record.c_ctrl,
            "product": self.record.product,
            "steps": steps,
            "trace": [s.digest() for s in self.states],
            "evaluations": self.evaluations,
            "history": self.history,
        }
        if timing:
            out["elapsed"] = self.elapsed
        return out


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def shoot(
    state,
    skeleton: Skeleton,
    config: PlannerConfig | None = None,
    scoring: str = PRODUCT,
) -> PlanResult:
    """Random shooting over whole action sequences, then CEM refinement.

    The incumbent only changes on strict improvement and ties inside a batch
    go to the lowest sample index, so results are a pure function of the
    inputs and the seed.
    """
    config = config or PlannerConfig()
    if scoring not in (PRODUCT, SUM):
        raise ValueError(f"unknown scoring {scoring!r}")
    t0 = time.perf_counter()
    try:
        world.check_preconditions(state, skeleton.primitives[0])
    except world.PreconditionError as e:
        raise StepError(0, e) from e
    rng = _rng(config.seed)
    dim = sum(skeleton.dims)
    n = config.samples
    n_elite = max(1, int(math.ceil(config.elite_frac * n)))
    scale = config.scale

    def run(batch):
        return np.array(
            [_objective(state, skeleton, skeleton.split(x), scale, scoring) for x in batch]
        )

    batch = rng.uniform(-1.0, 1.0, (n, dim))
    values = run(batch)
    best_i = int(np.argmax(values))
    best_x, best_v = batch[best_i].copy(), float(values[best_i])
    history = [best_v]
    mu = np.zeros(dim)
    std = np.full(dim, 1.0 / math.sqrt(3.0))
    alpha = config.smoothing
    for _ in range(config.cem_iters):
        order = np.argsort(-values, kind="stable")
        elites = batch[order[:n_elite]]
        mu = alpha * mu + (1.0 - alpha) * elites.mean(axis=0)
        std = alpha * std + (1.0 - alpha) * elites.std(axis=0)
        std = np.maximum(std, config.min_std)
        batch = np.clip(mu + std * rng.standard_normal((n, dim)), -1.0, 1.0)
        values = run(batch)
        i = int(np.argmax(values))
        if values[i] > best_v:
            best_x, best_v = batch[i].copy(), float(values[i])
        history.append(best_v)
    actions = skeleton.split(best_x)
    record = score_plan(state, skeleton, actions, config)
    objective = record.product if scoring == PRODUCT else record.sum_score
    return PlanResult(
        skeleton,
        actions,
        record,
        objective,
        scoring,
        evaluations=n * (config.cem_iters + 1),
        elapsed=time.perf_counter() - t0,
        history=history,
    )


@dataclass(frozen=True)
class Candidate:
    """One proposal for the next skill in a greedy step."""

    primitive: world.Primitive
    s_task: float
    preference: Node | None = None
    control: Control = Control()
    c_task: float = 1.0
    c_ctrl: float = 1.0


@dataclass
class GreedyChoice:
    index: int
    skill: Skill
    objective: float
    scores: list[float]
    result: PlanResult | None


def greedy_step(state, candidates: Sequence[Candidate], config: PlannerConfig | None = None):
    """Best (candidate, action) by S_task * c * F * Q; ties go to the earliest candidate.

    Candidates whose preconditions fail in ``state`` score 0. Every inner
    optimization uses the same seed so candidates are compared on equal terms.
    """
    config = config or PlannerConfig()
    if not candidates:
        raise ValueError("greedy step needs at least one candidate")
    if len(candidates) > config.candidates:
        raise ValueError(f"{len(candidates)} candidates exceed the budget L={config.candidates}")
    inner = PlannerConfig(
        samples=config.samples,
        elite_frac=config.elite_frac,
        cem_iters=config.cem_iters,
        smoothing=config.smoothing,
        seed=config.seed,
        epsilon=config.epsilon,
        min_std=config.min_std,
    )
    best = None
    scores = []
    for i, c in enumerate(candidates):
        if not 0.0 < c.s_task <= 1.0:
            raise ValueError(f"S_task must lie in (0, 1], got {c.s_task!r}")
        try:
            world.check_preconditions(state, c.primitive)
        except world.PreconditionError:
            scores.append(0.0)
            continue
        sk = Skeleton((c.primitive,), (c.preference,), (c.control,))
        res = shoot(state, sk, inner)
        score = c.s_task * c.c_task * c.c_ctrl * res.objective
        scores.append(score)
        if best is None or score > best[1]:
            best = (i, score, res)
    if best is None:
        raise PlanningError("no greedy candidate is applicable in this state")
    i, score, res = best
    c = candidates[i]
    return GreedyChoice(i, Skill(c.primitive, res.actions[0], c.control), score, scores, res)


@dataclass
class Execution:
    result: PlanResult
    final_state: object
    trace: list
    greedy_steps: int
    executed: list[Skill]
    verification: list = field(default_factory=list)

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "objective": self.result.objective,
            "greedy_steps": self.greedy_steps,
            "plan": self.result.to_dict(timing),
            "executed": [
                {
                    "primitive": str(s.primitive),
                    "action": [float(v) for v in s.action],
                    "control": {"mode": s.control.mode, "preset": s.control.preset},
                }
                for s in self.executed
            ],
            "trace": self.trace,
            "final_state": self.final_state.digest(),
        }


def plan_and_execute(
    state,
    skeleton_source: Callable[[object], Skeleton],
    candidate_source: Callable[[object, int], Sequence[Candidate]],
    config: PlannerConfig | None = None,
    verify: Callable[[Skill, object, object], object] | None = None,
) -> Execution:
    """Shoot; on a zero objective take one greedy step and ask for a fresh skeleton.

    ``verify(skill, before, after)`` is called for every executed skill (the
    safety shield hooks in here). A greedy step whose best objective is itself
    zero is recorded but not executed.
    """
    config = config or PlannerConfig()
    trace: list = []
    executed: list[Skill] = []
    checks: list = []
    greedy = 0
    while True:
        skeleton = skeleton_source(state)
        result = shoot(state, skeleton, config)
        trace.append(
            {
                "event": "shoot",
                "skeleton": [str(p) for p in skeleton.primitives],
                "objective": result.objective,
                "state": state.digest(),
            }
        )
        log.info("shoot %s -> %.6g", [str(p) for p in skeleton.primitives], result.objective)
        if result.objective > config.epsilon:
            for t, skill in enumerate(result.skills()):
                before, after = result.states[t], result.states[t + 1]
                if verify is not None:
                    checks.append(verify(skill, before, after))
                executed.append(skill)
            trace.append({"event": "execute", "steps": len(skeleton)})
            return Execution(result, result.states[-1], trace, greedy, executed, checks)
        if greedy >= config.max_greedy:
            trace.append({"event": "fail", "reason": "greedy budget exhausted"})
            raise PlanningFailed(
                f"objective <= {config.epsilon} after {greedy} greedy steps", trace
            )
        greedy += 1
        cands = list(candidate_source(state, config.candidates))[: config.candidates]
        choice = greedy_step(state, cands, config)
        entry = {
            "event": "greedy",
            "candidates": [str(c.primitive) for c in cands],
            "scores": choice.scores,
            "chosen": str(choice.skill.primitive),
            "objective": choice.objective,
            "applied": choice.objective > config.epsilon,
        }
        trace.append(entry)
        log.info("greedy step %d -> %s (%.6g)", greedy, choice.skill.primitive, choice.objective)
        if choice.objective > config.epsilon:
            after = world.transition(state, choice.skill.primitive, choice.skill.action)
            if verify is not None:
                checks.append(verify(choice.skill, state, after))
            executed.append(choice.skill)
            state = after
