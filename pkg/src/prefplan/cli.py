"""Command-line entry point.

Exit codes: 0 ok, 1 input error, 2 planning failure, 3 transport or fixture error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from prefplan import world
from prefplan.ablation import AGENTS, SuiteError, load_suite, run_ablation
from prefplan.dsl import DslCheckError, DslError, EvalContext, diagnose, evaluate, parse, typecheck
from prefplan.execution import ExecutionError, execute, load_human_script, load_plan_steps
from prefplan.llm import (
    FixtureError,
    FixtureStore,
    GatewayError,
    LiveTransport,
    RecordingTransport,
    ReplayTransport,
    ResponseError,
    TransportError,
)
from prefplan.planner import PlannerConfig, PlanningError, plan_and_execute
from prefplan.safety.params import MODES, PRESETS
from prefplan.session import LanguageSession, default_fixtures, default_suite_path, load_plan_file

OK, INPUT_ERROR, PLANNING_FAILED, TRANSPORT_ERROR = 0, 1, 2, 3

log = logging.getLogger("prefplan")


class InputError(Exception):
    pass


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _write_or_print(text: str, out: str | None, name: str):
    if out is None:
        sys.stdout.write(text)
        return None
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text, encoding="utf-8")
    return d / name


def _transport(args, record: bool = False):
    fixtures = Path(args.fixtures) if args.fixtures else default_fixtures()
    if args.live:
        live = LiveTransport.from_env()
        return RecordingTransport(live, FixtureStore(fixtures)) if record else live
    return ReplayTransport(FixtureStore(fixtures))


def _scenario(path):
    if path is None:
        raise InputError("--scenario is required")
    try:
        return world.load_scenario(Path(path))
    except FileNotFoundError:
        raise InputError(f"scenario file not found: {path}") from None
    except OSError as e:
        raise InputError(f"{path}: {e}") from None


# -- commands -------------------------------------------------------------------


def cmd_plan(args, record: bool = False) -> int:
    scen = _scenario(args.scenario)
    state = scen.state
    if args.instruction is None and args.plan is None:
        raise InputError("give --instruction or --plan")
    fixed = None
    if args.plan:
        try:
            fixed = load_plan_file(args.plan, state)
        except (GatewayError, ResponseError, DslError) as e:
            raise InputError(f"invalid plan file: {e}") from None
    transport = _transport(args, record) if args.instruction is not None else None
    session = LanguageSession(args.instruction or "", transport, examples=[] if transport is None else None,
                              fixed=fixed)
    config = PlannerConfig(seed=args.seed)
    ex = plan_and_execute(state, session.skeleton, session.candidates, config)
    doc = {
        "scenario": scen.name,
        "instruction": args.instruction,
        "seed": args.seed,
        **ex.to_dict(),
    }
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    path = _write_or_print(text, args.out, "plan.json")
    if path is not None:
        print(f"objective={ex.result.objective:.6g} greedy_steps={ex.greedy_steps} wrote {path}")
    return OK


def cmd_exec(args) -> int:
    scen = _scenario(args.scenario)
    if args.plan is None:
        raise InputError("--plan is required")
    try:
        doc = json.loads(Path(args.plan).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"{args.plan}: {e}") from None
    steps = load_plan_steps(doc)
    human = load_human_script(args.human) if args.human else None
    rep = execute(scen.state, steps, args.mode, args.preset, human)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.json").write_text(json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n")
    (out / "events.jsonl").write_text(rep.events_jsonl())
    print(rep.summary())
    return OK


def cmd_ablate(args) -> int:
    try:
        suite = load_suite(args.suite or default_suite_path())
    except (KeyError, TypeError) as e:
        raise InputError(f"malformed suite: {e}") from None
    agents = tuple(a.strip() for a in args.agents.split(",") if a.strip())
    for a in agents:
        if a not in AGENTS:
            raise InputError(f"unknown agent {a!r}; choose from {', '.join(AGENTS)}")
    transport = _transport(args) if {"ours", "baseline2"} & set(agents) else None
    rep = run_ablation(suite, agents, args.rollouts, args.seed, transport, args.jobs)
    if args.out is None:
        sys.stdout.write(rep.to_csv())
    else:
        files = rep.write(args.out)
        print(" ".join(str(p) for p in files.values()))
    return OK


def _eval_state(args):
    if args.scenario is None:
        raise InputError("dsl eval needs --scenario")
    state = _scenario(args.scenario).state
    action = None
    predict = lambda: state  # noqa: E731  without an action the given state is the outcome
    if args.action:
        prim = world.Primitive.parse(args.action)
        try:
            values = [float(v) for v in (args.values or "").split(",") if v.strip()]
        except ValueError:
            raise InputError(f"bad --values {args.values!r}") from None
        if len(values) != prim.dim:
            raise InputError(f"{prim} takes {prim.dim} action values, got {len(values)}")
        action = np.asarray(values)
        predict = lambda: world.transition(state, prim, action)  # noqa: E731
    return state, action, predict


def cmd_dsl(args) -> int:
    source = Path(args.file).read_text(encoding="utf-8") if args.file else args.source
    if source is None:
        raise InputError("give a preference source or --file")
    catalog = _scenario(args.scenario).state.catalog() if args.scenario else None
    if args.dsl_command == "check":
        try:
            ast = parse(source)
        except DslError as e:
            print(f"error: {e}")
            return INPUT_ERROR
        diags = diagnose(ast, catalog)
        for d in diags:
            print(d)
        if not diags:
            print("ok")
        return INPUT_ERROR if diags else OK
    try:
        ast = typecheck(parse(source), catalog)
    except DslError as e:
        print(f"error: {e}")
        return INPUT_ERROR
    except DslCheckError as e:
        for d in e.diagnostics:
            print(d)
        return INPUT_ERROR
    state, action, predict = _eval_state(args)
    print(f"{evaluate(ast, EvalContext(state, action, predict)):.12g}")
    return OK


def cmd_fixtures(args) -> int:
    store = FixtureStore(Path(args.fixtures) if args.fixtures else default_fixtures())
    if args.fixtures_command == "list":
        for fx in sorted(store, key=lambda f: f.prompt_hash):
            kind = "candidates" if fx.candidate_scores is not None else "plan"
            print(f"{fx.prompt_hash[:16]} {kind} {len(fx.response_text)} chars")
        print(f"{len(store)} fixtures")
        return OK
    args.live = True
    return cmd_plan(args, record=True)


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prefplan", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log planner progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def transport_flags(sp):
        sp.add_argument("--fixtures", metavar="DIR", help="fixture directory (default: bundled)")
        sp.add_argument("--live", action="store_true", help="query the model endpoint from LLM_* variables")

    sp = sub.add_parser("plan", help="plan from an instruction or a fixed plan file")
    sp.add_argument("--scenario", metavar="PATH")
    sp.add_argument("--instruction", metavar="TEXT")
    sp.add_argument("--plan", metavar="PATH", help="fixed skeleton in PLAN/CONTROL/PREF block format")
    sp.add_argument("--seed", type=_seed, default=0, metavar="U64")
    sp.add_argument("--out", metavar="DIR")
    transport_flags(sp)

    sp = sub.add_parser("exec", help="execute a plan through the safety shield")
    sp.add_argument("--scenario", metavar="PATH")
    sp.add_argument("--plan", metavar="PATH", help="plan JSON written by the plan command")
    sp.add_argument("--mode", choices=MODES, help="override every skill's controller mode")
    sp.add_argument("--preset", choices=sorted(PRESETS), help="override every skill's preset")
    sp.add_argument("--human", metavar="PATH", help="scripted human motion JSON")
    sp.add_argument("--out", metavar="DIR")

    sp = sub.add_parser("ablate", help="agent comparison on a task suite")
    sp.add_argument("--suite", metavar="PATH")
    sp.add_argument("--agents", default=",".join(AGENTS), metavar="LIST")
    sp.add_argument("--rollouts", type=_positive, default=100, metavar="N")
    sp.add_argument("--seed", type=_seed, default=0, metavar="U64")
    sp.add_argument("--jobs", type=_positive, default=1, metavar="N", help="worker processes")
    sp.add_argument("--out", metavar="DIR")
    transport_flags(sp)

    sp = sub.add_parser("dsl", help="check or evaluate a preference function")
    dsub = sp.add_subparsers(dest="dsl_command", required=True)
    for name in ("check", "eval"):
        dp = dsub.add_parser(name)
        dp.add_argument("source", nargs="?")
        dp.add_argument("--file", metavar="PATH")
        dp.add_argument("--scenario", metavar="PATH")
        if name == "eval":
            dp.add_argument("--action", metavar="PRIMITIVE", help="e.g. 'place(red_box, desk)'")
            dp.add_argument("--values", metavar="LIST", help="normalized action values, comma separated")

    sp = sub.add_parser("fixtures", help="list or record replay fixtures")
    fsub = sp.add_subparsers(dest="fixtures_command", required=True)
    fp = fsub.add_parser("list")
    fp.add_argument("--fixtures", metavar="DIR")
    fp = fsub.add_parser("record", help="plan live and store every answer")
    fp.add_argument("--scenario", metavar="PATH")
    fp.add_argument("--instruction", metavar="TEXT", required=True)
    fp.add_argument("--seed", type=_seed, default=0, metavar="U64")
    fp.add_argument("--fixtures", metavar="DIR")
    fp.add_argument("--out", metavar="DIR")
    fp.set_defaults(plan=None)
    return p


COMMANDS = {"plan": cmd_plan, "exec": cmd_exec, "ablate": cmd_ablate, "dsl": cmd_dsl, "fixtures": cmd_fixtures}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return INPUT_ERROR if e.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PlanningError as e:
        print(f"planning failed: {e}", file=sys.stderr)
        trace = getattr(e, "trace", None)
        if trace is not None:
            print(json.dumps(trace, indent=1, sort_keys=True), file=sys.stderr)
        return PLANNING_FAILED
    except (FixtureError, TransportError, GatewayError, ResponseError) as e:
        print(f"transport error: {e}", file=sys.stderr)
        return TRANSPORT_ERROR
    except (InputError, world.ScenarioError, SuiteError, ExecutionError, DslError, DslCheckError,
            ValueError, OSError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
