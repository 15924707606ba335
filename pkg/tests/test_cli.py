import csv
import io
import json

import numpy as np
import pytest

from conftest import DATA, scenario_path
from golden_dsl import LEFT_OF_BLUE
from prefplan import world
from prefplan.ablation import CSV_HEADER
from prefplan.cli import INPUT_ERROR, OK, PLANNING_FAILED, TRANSPORT_ERROR, main

HANDOVER_INSTRUCTION = "Hand me the screwdriver, and make sure the handle is pointing towards me."
REGRASP_INSTRUCTION = "Give me the screwdriver handle first; put it down and grasp it again if you have to."
TABLETOP = str(scenario_path("tabletop"))
HANDOVER = str(scenario_path("handover"))


def cli(capsys, *args):
    rc = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return rc, out, err


@pytest.fixture(scope="module")
def handover_plan(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan")
    assert main(["plan", "--scenario", HANDOVER, "--instruction", HANDOVER_INSTRUCTION, "--seed", "7",
                 "--out", str(out)]) == OK
    return out / "plan.json"


@pytest.fixture(scope="module")
def tabletop_plan(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan")
    assert main(["plan", "--scenario", TABLETOP, "--plan", str(DATA / "left_of_blue.plan"), "--out", str(out)]) == OK
    return out / "plan.json"


# -- plan -------------------------------------------------------------------------


def test_plan_handover(handover_plan):
    doc = json.loads(handover_plan.read_text())
    assert doc["seed"] == 7 and doc["scenario"] == "handover"
    assert doc["greedy_steps"] == 0 and doc["objective"] > 0.0
    assert [s["primitive"] for s in doc["executed"]] == ["pick(screwdriver)", "static_handover(screwdriver)"]
    assert "elapsed" not in doc["plan"]


def test_plan_is_byte_identical(capsys, tmp_path, handover_plan):
    rc, _, _ = cli(capsys, "plan", "--scenario", HANDOVER, "--instruction", HANDOVER_INSTRUCTION, "--seed", 7,
                   "--out", tmp_path)
    assert rc == OK
    assert (tmp_path / "plan.json").read_bytes() == handover_plan.read_bytes()


def test_plan_to_stdout(capsys, tabletop_plan):
    rc, out, _ = cli(capsys, "plan", "--scenario", TABLETOP, "--plan", DATA / "left_of_blue.plan")
    assert rc == OK
    assert out == tabletop_plan.read_text()


def test_plan_regrasp_takes_one_greedy_step(capsys):
    rc, out, _ = cli(capsys, "plan", "--scenario", scenario_path("regrasp"), "--instruction", REGRASP_INSTRUCTION,
                     "--seed", 0)
    assert rc == OK
    doc = json.loads(out)
    assert doc["greedy_steps"] == 1
    assert doc["executed"][0]["primitive"] == "pick(screwdriver)"


def test_plan_errors(capsys, tmp_path):
    assert cli(capsys, "plan", "--scenario", tmp_path / "missing.json", "--instruction", "x")[0] == INPUT_ERROR
    assert cli(capsys, "plan", "--scenario", TABLETOP)[0] == INPUT_ERROR
    assert cli(capsys, "plan", "--scenario", TABLETOP, "--seed", "-1", "--instruction", "x")[0] == INPUT_ERROR
    # no recorded answer for this instruction
    rc, _, err = cli(capsys, "plan", "--scenario", TABLETOP, "--instruction", "Juggle the boxes.")
    assert rc == TRANSPORT_ERROR and "transport error" in err
    bad = tmp_path / "bad.plan"
    bad.write_text(open(DATA / "left_of_blue.plan").read().replace("blue_box", "purple_box"))
    assert cli(capsys, "plan", "--scenario", TABLETOP, "--plan", bad)[0] == INPUT_ERROR


def test_plan_failure_exit_code(capsys, tmp_path):
    zero = tmp_path / "zero.plan"
    zero.write_text("```PLAN\nplace(red_box, desk)\n```\n```CONTROL\nstop coexistence\n```\n```PREF[1]\n0.0\n```\n")
    rc, _, err = cli(capsys, "plan", "--scenario", TABLETOP, "--plan", zero)
    assert rc == PLANNING_FAILED and "planning failed" in err


# -- exec -------------------------------------------------------------------------


def test_exec_without_human_logs_nothing(capsys, tmp_path, tabletop_plan):
    rc, out, _ = cli(capsys, "exec", "--scenario", TABLETOP, "--plan", tabletop_plan, "--out", tmp_path)
    assert rc == OK
    assert (tmp_path / "events.jsonl").read_text() == ""
    assert "events=0" in out
    traj = json.loads((tmp_path / "trajectory.json").read_text())
    assert traj["min_distance"] is None and traj["steps"][0]["completed"]


def test_exec_stop_mode_with_approaching_person(capsys, tmp_path, tabletop_plan):
    rc, out, _ = cli(capsys, "exec", "--scenario", TABLETOP, "--plan", tabletop_plan, "--mode", "stop",
                     "--human", DATA / "approaching_human.json", "--out", tmp_path)
    assert rc == OK
    events = [json.loads(ln) for ln in (tmp_path / "events.jsonl").read_text().splitlines()]
    assert events and all(e["mode"] == "stop" for e in events)
    assert "max_speed_under_intersection=0.0000m/s" in out
    traj = json.loads((tmp_path / "trajectory.json").read_text())
    assert traj["max_speed_in_contact"] == 0.0
    assert all(s["violations"] == 0 for s in traj["steps"])


def test_exec_expert_is_faster(capsys, tmp_path, handover_plan):
    durations = {}
    for name in ("expert", "beginner"):
        rc, _, _ = cli(capsys, "exec", "--scenario", HANDOVER, "--plan", handover_plan, "--preset", name,
                       "--out", tmp_path / name)
        assert rc == OK
        durations[name] = json.loads((tmp_path / name / "trajectory.json").read_text())["duration"]
    assert durations["expert"] < durations["beginner"]


def test_exec_errors(capsys, tmp_path, tabletop_plan):
    assert cli(capsys, "exec", "--scenario", TABLETOP, "--plan", tmp_path / "none.json")[0] == INPUT_ERROR
    assert cli(capsys, "exec", "--scenario", TABLETOP, "--plan", tabletop_plan, "--human",
               tmp_path / "none.json", "--out", tmp_path)[0] == INPUT_ERROR
    assert cli(capsys, "exec", "--scenario", TABLETOP, "--plan", tabletop_plan, "--mode", "hover")[0] == INPUT_ERROR
    empty = tmp_path / "empty.json"
    empty.write_text('{"executed": []}')
    assert cli(capsys, "exec", "--scenario", TABLETOP, "--plan", empty)[0] == INPUT_ERROR


# -- dsl --------------------------------------------------------------------------


def place_values(state, dy):
    p = world.Primitive.parse("place(red_box, desk)")
    lo, hi = world.bounds(state, p)
    blue = state.objects["blue_box"].pose.position
    target = np.array([blue[0], blue[1] + dy, 0.0])
    return ",".join(repr(float(v)) for v in 2.0 * (target - lo) / (hi - lo) - 1.0)


@pytest.mark.parametrize("dy,check", [(0.5, lambda v: v > 0.9), (-0.5, lambda v: v < 0.1)])
def test_dsl_eval_left_of(capsys, tabletop, dy, check):
    rc, out, _ = cli(capsys, "dsl", "eval", LEFT_OF_BLUE, "--scenario", TABLETOP,
                     "--action", "place(red_box, desk)", "--values", place_values(tabletop, dy))
    assert rc == OK
    assert check(float(out))


def test_dsl_eval_without_action(capsys):
    rc, out, _ = cli(capsys, "dsl", "eval", "OR(0.5, 0.4)", "--scenario", TABLETOP)
    assert rc == OK and float(out) == pytest.approx(0.7, abs=1e-12)
    # without an action the given state also stands in for the successor
    rc, out, _ = cli(capsys, "dsl", "eval", LEFT_OF_BLUE, "--scenario", TABLETOP)
    assert rc == OK and 0.0 <= float(out) <= 1.0


def test_dsl_check(capsys, tmp_path):
    rc, out, _ = cli(capsys, "dsl", "check", LEFT_OF_BLUE, "--scenario", TABLETOP)
    assert rc == OK and out.strip() == "ok"
    rc, out, _ = cli(capsys, "dsl", "check", "AND(0.5,", "--scenario", TABLETOP)
    assert rc == INPUT_ERROR and "syntax error" in out
    rc, out, _ = cli(capsys, "dsl", "check", LEFT_OF_BLUE.replace("blue_box", "purple_box"), "--scenario", TABLETOP)
    assert rc == INPUT_ERROR and "unknown object" in out
    f = tmp_path / "pref.txt"
    f.write_text("linear(0.3, 1.0, 0.0)")
    rc, out, _ = cli(capsys, "dsl", "check", "--file", f)
    assert rc == INPUT_ERROR and "range violation" in out


def test_dsl_eval_errors(capsys, tabletop):
    assert cli(capsys, "dsl", "eval", "AND(0.5")[0] == INPUT_ERROR
    assert cli(capsys, "dsl", "eval", LEFT_OF_BLUE, "--scenario", TABLETOP, "--action", "place(red_box, desk)",
               "--values", "0.1")[0] == INPUT_ERROR
    assert cli(capsys, "dsl", "eval", LEFT_OF_BLUE, "--scenario", TABLETOP, "--action", "place(red_box, desk)",
               "--values", "a,b,c")[0] == INPUT_ERROR
    assert cli(capsys, "dsl", "eval")[0] == INPUT_ERROR


# -- ablate, fixtures, usage ---------------------------------------------------------------


@pytest.fixture(scope="module")
def ablate_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("ablate")
    assert main(["ablate", "--rollouts", "2", "--agents", "oracle,ours", "--seed", "3", "--out", str(out)]) == OK
    return out


def test_ablate_outputs(ablate_csv):
    text = (ablate_csv / "ablation.csv").read_text()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 2 * 10
    raw = [json.loads(ln) for ln in (ablate_csv / "rollouts.jsonl").read_text().splitlines()]
    for row in rows[1:]:
        recs = [r for r in raw if r["agent"] == row[0] and r["task"] == row[1]]
        assert abs(float(row[3]) - sum(r["pref"] for r in recs) / len(recs)) <= 1e-12
        assert abs(float(row[2]) - sum(r["success"] for r in recs) / len(recs)) <= 1e-12


def test_ablate_parallel_is_byte_identical(capsys, ablate_csv):
    rc, out, _ = cli(capsys, "ablate", "--rollouts", 2, "--agents", "oracle,ours", "--seed", 3, "--jobs", 2)
    assert rc == OK
    assert out == (ablate_csv / "ablation.csv").read_text()


def test_ablate_errors(capsys, tmp_path):
    assert cli(capsys, "ablate", "--agents", "nobody")[0] == INPUT_ERROR
    assert cli(capsys, "ablate", "--rollouts", 0)[0] == INPUT_ERROR
    assert cli(capsys, "ablate", "--suite", tmp_path / "none.json")[0] == INPUT_ERROR


def test_fixtures_list(capsys):
    rc, out, _ = cli(capsys, "fixtures", "list")
    assert rc == OK
    assert out.splitlines()[-1].endswith("fixtures")


def test_usage_errors(capsys):
    assert cli(capsys)[0] == INPUT_ERROR
    assert cli(capsys, "teleport")[0] == INPUT_ERROR
    assert main(["--help"]) == OK
