"""Record the bundled replay fixtures under src/prefplan/data/fixtures.

The answers are authored by hand, standing in for a language model:

- ablation suite: one answer per task and trial; trial r scales every
  ``linear`` threshold of the oracle by ``SCALES[r]``
- handover scene: the two-step plan of the screwdriver example
- regrasp scene: a direct handover plan, the next-step candidates, and the
  place/pick/handover plan asked for after the greedy pick. The flow is run
  for every seed in ``SEEDS`` to confirm that each seed reaches the same
  prompts (a pick leaves the object where it is, so it does).
"""

import dataclasses
import re
import shutil
from pathlib import Path

from prefplan.ablation import TRIALS, load_suite, trial_prompt
from prefplan.dsl import parse, pretty
from prefplan.dsl.nodes import Linear, Node, Num
from prefplan.llm import Completion, FixtureStore, RecordingTransport, format_return
from prefplan.planner import PlannerConfig, plan_and_execute
from prefplan.session import LanguageSession, data_path
from prefplan.world import load_scenario

OUT = Path(__file__).resolve().parents[1] / "src" / "prefplan" / "data" / "fixtures"
SCALES = (1.0, 0.95, 0.9)
SEEDS = (0, 1, 2, 3, 4, 7)

HANDOVER_INSTRUCTION = "Hand me the screwdriver, and make sure the handle is pointing towards me."
REGRASP_INSTRUCTION = "Give me the screwdriver handle first; put it down and grasp it again if you have to."

SD = "getPose(next_state, 'screwdriver')"
ME = "getPose(next_state, 'human')"
# grasp close to the tip, i.e. by the rod
BY_ROD = (
    "threshold(positionNorm(getPose(next_state, 'ee', 'screwdriver'), "
    "getPose(next_state, 'screwdriver', 'screwdriver'), axis=['z']), 0.05, false)"
)
HANDLE_TO_ME = (
    f"AND(linear(pointingInDirectionMetric({SD}, {ME}, main_axis=[0, 0, -1]), 0.3, 0.7, false), "
    f"linear(positionNorm({SD}, {ME}, axis=['x', 'y']), 0.25, 0.4, false))"
)
# handle towards the person, held in front of them
HANDLE_IN_FRONT = (
    f"AND(linear(pointingInDirectionMetric({SD}, {ME}, main_axis=[0, 0, -1]), 0.3, 0.7, false), "
    f"AND(linear(positionNorm({SD}, {ME}, axis=['x']), 0.25, 0.3), "
    f"linear(positionNorm({SD}, {ME}, axis=['y']), 0.1, 0.15, false)))"
)
CTRL = "stop coexistence"
# a handover ends inside the person's reach, where stop mode would never let the arm move
HAND = "contact intermediate"


def scaled(node: Node, k: float) -> Node:
    """Copy of ``node`` with every linear threshold multiplied by ``k``."""
    changes = {}
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node) and f.name != "loc":
            changes[f.name] = scaled(v, k)
    if isinstance(node, Linear):
        changes["t_1"] = Num(round(node.t_1.value * k, 6))
        changes["t_2"] = Num(round(node.t_2.value * k, 6))
    return dataclasses.replace(node, **changes)


class AuthoredModel:
    """Answers the screwdriver prompts; anything else is a bug in this script."""

    def complete(self, prompt, logprobs=False):
        text = prompt.user
        instruction = re.findall(r"^Instruction: (.*)$", text, re.M)[-1]
        holding = "Robot hand: holding screwdriver" in text.split("## Instruction")[-1]
        if instruction == HANDOVER_INSTRUCTION:
            return Completion(format_return(
                ["pick(screwdriver)", "static_handover(screwdriver)"], [CTRL, HAND], [BY_ROD, HANDLE_TO_ME]
            ))
        if instruction != REGRASP_INSTRUCTION:
            raise KeyError(instruction)
        if logprobs:
            body = format_return(
                ["pick(screwdriver)", "static_handover(screwdriver)", "place(screwdriver, desk)"],
                [CTRL, HAND, CTRL],
                ["1.0", HANDLE_IN_FRONT, "1.0"],
            ).replace("```PLAN", "```CANDIDATES", 1)
            return Completion(body, (-0.4, -2.1, -3.5))
        if holding:
            return Completion(format_return(
                ["place(screwdriver, desk)", "pick(screwdriver)", "static_handover(screwdriver)"],
                [CTRL, CTRL, HAND],
                ["1.0", "1.0", HANDLE_IN_FRONT],
            ))
        return Completion(format_return(
            ["pick(screwdriver)", "static_handover(screwdriver)"], [CTRL, HAND], ["1.0", HANDLE_IN_FRONT]
        ))


def main():
    if OUT.exists():
        shutil.rmtree(OUT)
    store = FixtureStore(OUT)

    suite = load_suite(data_path("suite", "ablation.json"))
    for i, task in enumerate(suite.tasks):
        for r in range(TRIALS):
            prefs = [pretty(scaled(parse(src), SCALES[r])) for src in task.oracle_sources]
            answer = format_return([str(p) for p in task.plan], [str(c) for c in task.controls], prefs)
            store.record(trial_prompt(suite, i, r).text, answer, key=f"ablation-{task.id}-{r}")

    rec = RecordingTransport(AuthoredModel(), store)
    state = load_scenario(data_path("scenarios", "handover.json")).state
    LanguageSession(HANDOVER_INSTRUCTION, rec).skeleton(state)

    state = load_scenario(data_path("scenarios", "regrasp.json")).state
    for seed in SEEDS:
        session = LanguageSession(REGRASP_INSTRUCTION, rec)
        ex = plan_and_execute(state, session.skeleton, session.candidates, PlannerConfig(seed=seed))
        print("regrasp seed", seed, "greedy steps", ex.greedy_steps, "objective", round(ex.result.objective, 4))
    print(len(FixtureStore(OUT)), "fixtures in", OUT)


if __name__ == "__main__":
    main()
