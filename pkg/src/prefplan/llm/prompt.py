"""Prompt assembly for plan and greedy-candidate requests.

A prompt is a fixed system part (purpose, terminology, state definition,
primitives, objective, function signature), the building-block listing,
the in-context examples and finally the live instruction. The text is
assembled deterministically so its hash can key replay fixtures.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from prefplan.dsl import DslError, DslCheckError, parse, typecheck
from prefplan.safety.params import MODES, PRESETS
from prefplan.world.primitives import HANDOVER, PICK, PLACE, Primitive


class PromptError(ValueError):
    pass


PURPOSE = """\
You are the planning assistant of a collaborative robot arm that shares a
tabletop workspace with a person. Given a description of the scene and an
instruction from the person, you return a task plan, a controller setting
for every step and one preference function per step. A downstream motion
planner picks the continuous parameters of every step so that the steps
succeed and the person is satisfied with how they are executed."""

TERMINOLOGY = """\
- Task plan: the ordered list of primitives the robot executes.
- Primitive: a parameterized manipulation skill applied to an object.
- Control parameters: the controller mode and a named parameter preset used
  while executing a step.
- Preference function: an expression that maps the current state, the step
  action and the predicted next state to the probability that the person is
  satisfied with the step."""

STATE_DEFINITION = """\
A state lists the objects with their shapes and world poses, the support
surfaces, the robot end effector and, when present, the person. Predicates:
on(object, surface) when an object rests on a surface, held(object) when the
robot holds it, near(a, b) when two objects are closer than 0.15 m.
Poses are given as a position in meters and a unit quaternion (w, x, y, z)."""

PRIMITIVES = f"""\
- {PICK}(obj): grasp a free object; the action chooses the grasp offset along
  the object and the gripper yaw.
- {PLACE}(obj, surface): put the held object on a surface; the action chooses
  the x, y position and yaw on the surface.
- {HANDOVER}(obj): hold the object out to the person; the action chooses the
  hand position near the person and the hand orientation."""

OBJECTIVE = f"""\
Return three fenced blocks, then one fenced block per step:
- PLAN: one primitive call per line, for example `place(red_box, desk)`.
- CONTROL: one line per step with a controller mode and a preset name.
  Modes: {", ".join(MODES)}. Presets: {", ".join(PRESETS)}.
- PREF[t] for t = 1..H: the preference function of step t.
The number of PLAN lines, CONTROL lines and PREF blocks must be equal.
A step without a preference uses the constant 1.0.
Preference functions are written in a restricted call-expression language:
only the building blocks below, numbers, quoted strings, true/false, lists
such as ['x', 'y'] or [0, 0, -1], and the names state, action and
next_state. There are no variables, operators or statements. AND and OR take
exactly two arguments; nest them for more."""

SIGNATURE = """\
The preference function body is a single expression in the scope of
    def preference(state, action, next_state) -> float
where next_state is the predicted state after the step."""

BUILDING_BLOCKS = """\
# Get the pose of an object in a specified frame from the current environment state.
pose = getPose(state, obj, frame='world')
# Get the L1, L2, or L_inf norm of the positional difference of the two poses. Select axis to evaluate the norm on.
metric = positionNorm(pose_1, pose_2, norm='L2', axis=['x', 'y', 'z'])
# Calculate the difference in rotation of two poses using the great circle distance.
metric = greatCircleDistance(pose_1, pose_2)
# Evaluate if an object is pointing in a given direction. Rotates the given main axis by pose_1.orientation and calculates the greatCircleDistance between the rotated axis and pose_2.position.
metric = pointingInDirectionMetric(pose_1, pose_2, main_axis=[1, 0, 0])
# Calculate the rotational difference between pose_1 and pose_2 around the given axis.
metric = rotationAngle(pose_1, pose_2, axis)
# Return 1.0 if metric >= t, 0.0 otherwise. And vice versa if not direction.
prob = threshold(metric, t, direction=true)
# Return 1.0 if metric >= t_2, 0.0 if metric < t_1, and linearly interpolate otherwise. And vice versa if not direction.
prob = linear(metric, t_1, t_2, direction=true)
# Normal cummulative distribution function with given mean and standard deviation
prob = normal(metric, mean, std_dev, direction=true)
prob = AND(prob_1, prob_2)
prob = OR(prob_1, prob_2)"""

ORIENTATION = """\
The robot base is at the origin. x points forward, away from the robot, y
points to the robot's left and z points up. "Left of X" means a larger y
than X, "behind X" a larger x, "in front of X" a smaller x (closer to the
robot)."""

CANDIDATE_OBJECTIVE = """\
The full plan could not be executed from the current state. Propose the
single next step instead. Return a CANDIDATES block with up to {budget}
primitive calls, best first, one per line; a CONTROL block with one line per
candidate; and one PREF[k] block per candidate."""


def _fmt(x) -> str:
    return "[" + ", ".join(f"{float(v):.3f}" for v in x) + "]"


def describe_state(state) -> str:
    """Text description of a world state: objects, surfaces, predicates."""
    lines = ["Objects:"]
    for b in state.objects.values():
        shape = b.shape.to_dict()
        kind = shape["type"]
        if kind == "box":
            dims = f"box {_fmt(shape['extents'])}"
        elif kind == "cylinder":
            dims = f"cylinder r={shape['radius']:.3f} h={shape['height']:.3f}"
        else:
            dims = f"composite of {len(shape['parts'])} parts"
        lines.append(
            f"- {b.id}: {dims}, position {_fmt(b.pose.position)}, "
            f"orientation {_fmt(b.pose.orientation)}"
        )
    lines.append("Surfaces:")
    for s in state.surfaces.values():
        lines.append(f"- {s.id}: center {_fmt(s.center)}, size {_fmt(s.extents)}")
    held = state.robot.held
    lines.append(f"Robot hand: {'holding ' + held if held else 'empty'}")
    if state.human is not None:
        lines.append(f"Person: standing at {_fmt(state.human.centroid)}")
    preds = []
    if held is not None:
        preds.append(f"held({held})")
    free = state.free_objects()
    for b in free:
        z0 = b.z_range[0]
        for s in state.surfaces.values():
            if abs(z0 - s.height) < 0.01 and s.outside_distance(*b.pose.position[:2]) <= 0:
                preds.append(f"on({b.id}, {s.id})")
    for i, a in enumerate(free):
        for b in free[i + 1 :]:
            if np.linalg.norm(a.pose.position - b.pose.position) < 0.15:
                preds.append(f"near({a.id}, {b.id})")
    lines.append("Predicates: " + (", ".join(preds) if preds else "none"))
    return "\n".join(lines)


@dataclass(frozen=True)
class Example:
    """One in-context example: the query part plus the expected return."""

    task: str
    state: str
    instruction: str
    plan: tuple[str, ...]
    controls: tuple[str, ...]
    preferences: tuple[str, ...]
    fixed_plan: bool = True
    fixed_controls: bool = True
    orientation: str = ORIENTATION

    def validate(self):
        if not len(self.plan) == len(self.controls) == len(self.preferences):
            raise PromptError(f"example {self.task!r}: plan, controls and preferences differ in length")
        for i, src in enumerate(self.preferences, 1):
            try:
                parse(src)
            except DslError as e:
                raise PromptError(f"example {self.task!r} PREF[{i}]: {e}") from e
        for line in self.plan:
            try:
                Primitive.parse(line)
            except ValueError as e:
                raise PromptError(f"example {self.task!r}: {e}") from e


def format_return(plan, controls, preferences) -> str:
    parts = ["```PLAN", *plan, "```", "```CONTROL", *controls, "```"]
    for i, src in enumerate(preferences, 1):
        parts += [f"```PREF[{i}]", src, "```"]
    return "\n".join(parts)


def _query(state_text, orientation, instruction, plan=None, controls=None) -> str:
    out = [
        "State description:",
        state_text,
        "Orientation definition:",
        orientation,
        f"Instruction: {instruction}",
    ]
    if plan:
        out += ["The task plan is fixed:", *plan]
    if controls:
        out += ["The controller parameters are fixed:", *controls]
    return "\n".join(out)


@dataclass
class PromptBundle:
    """Ordered (title, text) sections; the system part comes first."""

    sections: list[tuple[str, str]]
    system_count: int = 7
    feedback: list[str] = field(default_factory=list)

    @property
    def titles(self) -> list[str]:
        return [t for t, _ in self.sections]

    @property
    def system(self) -> str:
        return _join(self.sections[: self.system_count])

    @property
    def user(self) -> str:
        text = _join(self.sections[self.system_count :])
        for fb in self.feedback:
            text += "\n\n" + fb
        return text

    @property
    def text(self) -> str:
        return self.system + "\n\n" + self.user + "\n"

    @property
    def hash(self) -> str:
        return prompt_hash(self.text)

    @property
    def example_count(self) -> int:
        return sum(1 for t in self.titles if t.startswith("Example "))

    def with_feedback(self, response_text: str, diagnostics: list[str]) -> PromptBundle:
        fb = (
            "Your previous answer was:\n" + response_text.rstrip() + "\n"
            "It was rejected for these reasons:\n"
            + "\n".join(f"- {d}" for d in diagnostics)
            + "\nReturn a corrected answer in the same format."
        )
        return PromptBundle(list(self.sections), self.system_count, self.feedback + [fb])


def _join(sections) -> str:
    return "\n\n".join(f"## {title}\n{text}" for title, text in sections)


def canonical(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def prompt_hash(text: str) -> str:
    return hashlib.sha256(canonical(text).encode("utf-8")).hexdigest()


def _system(objective: str) -> list[tuple[str, str]]:
    return [
        ("Purpose", PURPOSE),
        ("Terminology", TERMINOLOGY),
        ("State definition", STATE_DEFINITION),
        ("Primitives", PRIMITIVES),
        ("Objective", objective),
        ("Preference function signature", SIGNATURE),
        ("Building blocks", BUILDING_BLOCKS),
    ]


def _examples(examples) -> list[tuple[str, str]]:
    if not examples:
        raise PromptError("at least one in-context example is required")
    out = []
    for i, ex in enumerate(examples, 1):
        ex.validate()
        query = _query(
            ex.state,
            ex.orientation,
            ex.instruction,
            ex.plan if ex.fixed_plan else None,
            ex.controls if ex.fixed_controls else None,
        )
        answer = format_return(ex.plan, ex.controls, ex.preferences)
        out.append((f"Example {i}", query + "\nExpected return:\n" + answer))
    return out


def build_prompt(state, instruction: str, examples, plan=None, controls=None) -> PromptBundle:
    """Prompt for a full plan; ``plan``/``controls`` embed a fixed skeleton when given."""
    sections = _system(OBJECTIVE) + _examples(examples)
    sections.append(
        (
            "Instruction",
            _query(
                describe_state(state),
                ORIENTATION,
                instruction,
                [str(p) for p in plan] if plan else None,
                [str(c) for c in controls] if controls else None,
            ),
        )
    )
    return PromptBundle(sections)


def build_candidate_prompt(state, instruction: str, examples, budget: int) -> PromptBundle:
    """Prompt asking for at most ``budget`` candidates for the next step."""
    if budget < 1:
        raise PromptError("candidate budget must be at least 1")
    objective = OBJECTIVE + "\n\n" + CANDIDATE_OBJECTIVE.format(budget=budget)
    sections = _system(objective) + _examples(examples)
    sections.append(("Instruction", _query(describe_state(state), ORIENTATION, instruction)))
    return PromptBundle(sections)


def select_examples(pool, exclude: str, k: int, rng: np.random.Generator) -> list[Example]:
    """``k`` examples drawn without replacement from tasks other than ``exclude``."""
    others = [e for e in pool if e.task != exclude]
    if len(others) < k:
        raise PromptError(f"need {k} examples, only {len(others)} available")
    idx = rng.choice(len(others), size=k, replace=False)
    return [others[i] for i in sorted(idx)]


def check_preferences(sources, catalog) -> list[str]:
    """Diagnostics for DSL sources against a scene catalog (empty when all are valid)."""
    out = []
    for i, src in enumerate(sources, 1):
        try:
            typecheck(parse(src), catalog)
        except DslCheckError as e:
            out += [f"PREF[{i}]: {d}" for d in e.diagnostics]
        except DslError as e:
            out.append(f"PREF[{i}]: {e}")
    return out
