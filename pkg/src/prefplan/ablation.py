"""Agent comparison over a suite of fixed-plan tasks.

Four agents share the sampler and differ only in scoring:

- baseline1: product of feasibility only
- baseline2: sum of feasibility and generated preference per step
- oracle:    product with the hand-written preferences
- ours:      product with the generated preferences

Every rollout draws its initial state and planner seed from
``SeedSequence([seed, task, agent, rollout])`` so the results do not depend
on execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from prefplan import world
from prefplan.dsl import EvalContext, evaluate, parse, pretty, typecheck
from prefplan.dsl.nodes import Num
from prefplan.llm import Example, build_prompt, describe_state, request_plan, select_examples
from prefplan.planner import PRODUCT, SUM, PlannerConfig, Skeleton, shoot
from prefplan.safety.params import Control

AGENTS = ("baseline1", "baseline2", "oracle", "ours")
CSV_HEADER = ("agent", "task", "success_mean", "pref_mean", "ci_lo", "ci_hi", "n")
TRIALS = 3
EXAMPLES_PER_PROMPT = 3
BOOTSTRAP = 10_000
# rollout index reserved for the bootstrap streams
STATS_KEY = 2**32 - 1


class SuiteError(ValueError):
    pass


@dataclass
class Task:
    id: str
    scenario: world.Scenario
    instruction: str
    plan: tuple[world.Primitive, ...]
    controls: tuple[Control, ...]
    oracle_sources: tuple[str, ...]
    oracle: tuple
    conflict: bool = False
    scenario_path: str = ""

    @property
    def nontrivial(self) -> bool:
        """False when every oracle preference is the constant 1."""
        return not all(isinstance(f, Num) and f.value == 1.0 for f in self.oracle)

    def example(self) -> Example:
        return Example(
            self.id,
            describe_state(self.scenario.state),
            self.instruction,
            tuple(str(p) for p in self.plan),
            tuple(str(c) for c in self.controls),
            tuple(pretty(f) for f in self.oracle),
        )


@dataclass
class Suite:
    name: str
    tasks: list[Task]
    planner: PlannerConfig
    path: str = ""

    def task(self, tid: str) -> Task:
        for t in self.tasks:
            if t.id == tid:
                return t
        raise SuiteError(f"unknown task {tid!r}")

    @property
    def examples(self) -> list[Example]:
        return [t.example() for t in self.tasks]


def load_suite(path) -> Suite:
    """Suite JSON; scenario paths are relative to the suite file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SuiteError(f"{path}: {e}") from e
    tasks = []
    for td in doc["tasks"]:
        scen = world.load_scenario(path.parent / td["scenario"])
        plan = tuple(world.Primitive.parse(p) for p in td["plan"])
        controls = tuple(Control.parse(c) for c in td["controls"])
        sources = tuple(td["oracle"])
        if not len(plan) == len(controls) == len(sources):
            raise SuiteError(f"task {td['id']!r}: plan, controls and oracle differ in length")
        catalog = scen.state.catalog()
        oracle = tuple(typecheck(parse(s), catalog) for s in sources)
        tasks.append(
            Task(td["id"], scen, td["instruction"], plan, controls, sources, oracle,
                 bool(td.get("conflict", False)), td["scenario"])
        )
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise SuiteError("duplicate task ids")
    return Suite(doc.get("name", path.stem), tasks, PlannerConfig(**doc.get("planner", {})), str(path))


# -- generated preferences ----------------------------------------------------


def trial_prompt(suite: Suite, index: int, trial: int):
    """Prompt of one trial: three examples from the other tasks, fixed per (task, trial)."""
    task = suite.tasks[index]
    rng = np.random.default_rng([index, trial])
    examples = select_examples(suite.examples, task.id, EXAMPLES_PER_PROMPT, rng)
    return build_prompt(task.scenario.state, task.instruction, examples, task.plan, task.controls)


def generate(suite: Suite, transport, trials: int = TRIALS) -> dict[str, list[tuple]]:
    """Generated preference ASTs per task and trial."""
    out = {}
    for i, task in enumerate(suite.tasks):
        per = []
        for r in range(trials):
            resp = request_plan(trial_prompt(suite, i, r), transport, task.scenario.state)
            if tuple(resp.primitives) != task.plan:
                raise SuiteError(
                    f"task {task.id!r} trial {r}: answer changed the fixed plan "
                    f"({[str(p) for p in resp.primitives]})"
                )
            per.append(tuple(resp.preferences))
        out[task.id] = per
    return out


# -- rollouts -----------------------------------------------------------------


def rollout_seed(seed: int, task: int, agent: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, task, agent, index])


def oracle_score(task: Task, result) -> float:
    """Product of the oracle preferences on the executed states and actions."""
    p = 1.0
    for t, f in enumerate(task.oracle):
        s, nxt = result.states[t], result.states[t + 1]
        p *= evaluate(f, EvalContext(s, result.actions[t], lambda nxt=nxt: nxt))
    return p


def run_rollout(suite: Suite, ti: int, agent: str, index: int, seed: int, generated) -> dict:
    task = suite.tasks[ti]
    ai = AGENTS.index(agent)
    ss = rollout_seed(seed, ti, ai, index)
    state_ss, plan_ss = ss.spawn(2)
    state = world.jittered(task.scenario, np.random.default_rng(state_ss))
    trial = None
    if agent == "baseline1":
        prefs, scoring = (None,) * len(task.plan), PRODUCT
    elif agent == "oracle":
        prefs, scoring = task.oracle, PRODUCT
    else:
        trial = index % len(generated[task.id])
        prefs = generated[task.id][trial]
        scoring = SUM if agent == "baseline2" else PRODUCT
    config = replace(suite.planner, seed=int(plan_ss.generate_state(1)[0]))
    res = shoot(state, Skeleton(task.plan, prefs, task.controls), config, scoring)
    executed = res.objective > config.epsilon
    success = executed and all(res.record.hard_ok)
    pref = oracle_score(task, res) if executed else 0.0
    return {
        "agent": agent,
        "task": task.id,
        "rollout": index,
        "trial": trial,
        "objective": res.objective,
        "executed": executed,
        "success": 1.0 if success else 0.0,
        "pref": pref,
    }


def _task_rollouts(args) -> list[dict]:
    suite, ti, agents, rollouts, seed, generated = args
    return [
        run_rollout(suite, ti, a, i, seed, generated) for a in agents for i in range(rollouts)
    ]


# -- statistics ---------------------------------------------------------------


def bootstrap_ci(values, rng: np.random.Generator, resamples: int = BOOTSTRAP, level: float = 0.95):
    """Percentile bootstrap interval of the mean."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("bootstrap of an empty sample")
    idx = rng.integers(0, v.size, (resamples, v.size))
    means = v[idx].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    m = float(v.mean())
    # quantiles of resampled means can round just past the sample mean
    return min(float(lo), m), max(float(hi), m)


@dataclass
class AblationReport:
    rows: list[dict]
    records: list[dict] = field(repr=False, default_factory=list)
    seed: int = 0

    def row(self, agent: str, task: str) -> dict:
        for r in self.rows:
            if r["agent"] == agent and r["task"] == task:
                return r
        raise KeyError((agent, task))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r["agent"], r["task"]] + [repr(r[k]) for k in CSV_HEADER[2:6]] + [r["n"]])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "rows": self.rows}, indent=1, sort_keys=True) + "\n"

    def records_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def whisker_data(self) -> str:
        """gnuplot-ready columns, one block per agent separated by two blank lines."""
        out = []
        for agent in dict.fromkeys(r["agent"] for r in self.rows):
            out.append(f"# agent {agent}")
            out.append("# index task pref_mean ci_lo ci_hi success_mean success_ci_lo success_ci_hi")
            rows = [r for r in self.rows if r["agent"] == agent]
            for i, r in enumerate(rows):
                out.append(
                    f"{i} {r['task']} {r['pref_mean']:.6f} {r['ci_lo']:.6f} {r['ci_hi']:.6f} "
                    f"{r['success_mean']:.6f} {r['success_ci_lo']:.6f} {r['success_ci_hi']:.6f}"
                )
            out += ["", ""]
        return "\n".join(out)

    def write(self, out_dir) -> dict[str, Path]:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        files = {
            "csv": d / "ablation.csv",
            "json": d / "ablation.json",
            "raw": d / "rollouts.jsonl",
            "dat": d / "ablation.dat",
        }
        files["csv"].write_text(self.to_csv())
        files["json"].write_text(self.to_json())
        files["raw"].write_text(self.records_jsonl())
        files["dat"].write_text(self.whisker_data())
        return files


def summarize(records: list[dict], suite: Suite, agents, seed: int) -> AblationReport:
    rows = []
    for ti, task in enumerate(suite.tasks):
        for agent in agents:
            recs = [r for r in records if r["task"] == task.id and r["agent"] == agent]
            succ = [r["success"] for r in recs]
            pref = [r["pref"] for r in recs]
            ai = AGENTS.index(agent)
            s_rng, p_rng = (
                np.random.default_rng(s) for s in rollout_seed(seed, ti, ai, STATS_KEY).spawn(2)
            )
            s_lo, s_hi = bootstrap_ci(succ, s_rng)
            p_lo, p_hi = bootstrap_ci(pref, p_rng)
            rows.append(
                {
                    "agent": agent,
                    "task": task.id,
                    "success_mean": math.fsum(succ) / len(succ),
                    "pref_mean": math.fsum(pref) / len(pref),
                    "ci_lo": p_lo,
                    "ci_hi": p_hi,
                    "success_ci_lo": s_lo,
                    "success_ci_hi": s_hi,
                    "n": len(recs),
                    "nontrivial": task.nontrivial,
                    "conflict": task.conflict,
                }
            )
    return AblationReport(rows, records, seed)


def run_ablation(
    suite: Suite,
    agents=AGENTS,
    rollouts: int = 100,
    seed: int = 0,
    transport=None,
    jobs: int = 1,
    generated=None,
) -> AblationReport:
    agents = tuple(agents)
    for a in agents:
        if a not in AGENTS:
            raise ValueError(f"unknown agent {a!r}; choose from {', '.join(AGENTS)}")
    if rollouts < 1:
        raise ValueError("need at least one rollout")
    if generated is None:
        needs = {"ours", "baseline2"} & set(agents)
        generated = generate(suite, transport) if needs else {}
    work = [(suite, ti, agents, rollouts, seed, generated) for ti in range(len(suite.tasks))]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            chunks = list(ex.map(_task_rollouts, work))
    else:
        chunks = [_task_rollouts(w) for w in work]
    records = [r for c in chunks for r in c]
    return summarize(records, suite, agents, seed)
