"""Exhaustive coarse-grid optima of the optimizer benchmark tasks.

Every action dimension is sampled at 20 evenly spaced points of its
normalized range [-1, 1]. Two-step tasks use branch and bound over the first
step: the first-step factor (scale * Q * F) bounds the whole product because
every later factor is at most 1, so first-step grid points are visited in
decreasing bound order and the search stops once the bound falls to the
incumbent. The results are frozen into tests/data/optimizer_tasks.json.
"""

import itertools
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from prefplan import world
from prefplan.dsl import parse, typecheck
from prefplan.planner import _pref_value
from prefplan.session import data_path

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "optimizer_tasks.json"
POINTS = 20

R, B, G = "getPose(next_state, 'red_box')", "getPose(next_state, 'blue_box')", "getPose(next_state, 'green_box')"
SD, ME = "getPose(next_state, 'screwdriver')", "getPose(next_state, 'human')"


def left_of(ref, obj):
    return (
        f"AND(linear(pointingInDirectionMetric({ref}, {obj}, main_axis=[0, 1, 0]), 0.3, 0.6, false), "
        f"linear(positionNorm({obj}, {ref}, axis=['x', 'y']), 0.12, 0.2, false))"
    )


def dist(a, b, lo, hi, up):
    return f"linear(positionNorm({a}, {b}, axis=['x', 'y']), {lo}, {hi}, {'true' if up else 'false'})"


TURNED = f"normal(rotationAngle({R}, {B}, [0, 0, 1]), 0.785, 0.1, true)"
OFF_CENTRE_GRASP = (
    "linear(positionNorm(getPose(next_state, 'ee'), getPose(next_state, 'red_box'), axis=['z']), 0.0, 0.02)"
)

TASKS = [
    {"id": "place_left_of_blue", "scenario": "tabletop", "plan": ["place(red_box, desk)"], "prefs": [left_of(B, R)]},
    {"id": "place_near_green", "scenario": "tabletop", "plan": ["place(red_box, desk)"],
     "prefs": [dist(R, G, 0.07, 0.12, False)]},
    {"id": "place_far_from_blue", "scenario": "tabletop", "plan": ["place(red_box, desk)"],
     "prefs": [dist(R, B, 0.3, 0.5, True)]},
    {"id": "place_turned", "scenario": "tabletop", "plan": ["place(red_box, desk)"], "prefs": [TURNED]},
    {"id": "place_feasible_only", "scenario": "tabletop", "plan": ["place(red_box, desk)"], "prefs": ["1.0"]},
    {"id": "pick_off_centre", "scenario": "arrangement", "plan": ["pick(red_box)"], "prefs": [OFF_CENTRE_GRASP]},
    {"id": "move_red_left_of_blue", "scenario": "arrangement",
     "plan": ["pick(red_box)", "place(red_box, desk)"], "prefs": ["1.0", left_of(B, R)]},
    {"id": "move_blue_away", "scenario": "arrangement",
     "plan": ["pick(blue_box)", "place(blue_box, desk)"], "prefs": ["1.0", dist(B, R, 0.3, 0.5, True)]},
    {"id": "off_centre_grasp_then_turn", "scenario": "arrangement",
     "plan": ["pick(red_box)", "place(red_box, desk)"], "prefs": [OFF_CENTRE_GRASP, TURNED]},
    {"id": "screwdriver_to_person", "scenario": "handover",
     "plan": ["pick(screwdriver)", "place(screwdriver, desk)"],
     "prefs": ["1.0", dist(SD, ME, 0.55, 0.8, False)]},
]


def grid(dim):
    axis = np.linspace(-1.0, 1.0, POINTS)
    return [np.array(p) for p in itertools.product(axis, repeat=dim)]


def step_values(state, prim, pref):
    """(value, action) for every grid point of one step, value = Q * F."""
    out = []
    for a in grid(prim.dim):
        o = world.step(state, prim, a)
        v = o.q * _pref_value(pref, state, a, o) if o.q > 0 else 0.0
        out.append((v, a))
    return out


def optimum(task):
    state = world.load_scenario(data_path("scenarios", f"{task['scenario']}.json")).state
    cat = state.catalog()
    prims = [world.Primitive.parse(p) for p in task["plan"]]
    prefs = [typecheck(parse(s), cat) for s in task["prefs"]]
    first = step_values(state, prims[0], prefs[0])
    if len(prims) == 1:
        v, a = max(first, key=lambda x: x[0])
        return v, [a.tolist()], len(first)
    order = sorted(range(len(first)), key=lambda i: -first[i][0])
    best, arg, evals = 0.0, None, len(first)
    for i in order:
        bound, a1 = first[i]
        if bound <= best:
            break
        inner = step_values(world.transition(state, prims[0], a1), prims[1], prefs[1])
        evals += len(inner)
        v2, a2 = max(inner, key=lambda x: x[0])
        if bound * v2 > best:
            best, arg = bound * v2, [a1.tolist(), a2.tolist()]
    return best, arg, evals


def main():
    only = set(sys.argv[1:])
    out = []
    for task in TASKS:
        if only and task["id"] not in only:
            continue
        t0 = time.time()
        v, arg, evals = optimum(task)
        print(f"{task['id']:24s} optimum {v:.6f} evals {evals} ({time.time() - t0:.0f} s)", flush=True)
        out.append(dict(task, grid_points=POINTS, grid_optimum=v, grid_argmax=arg))
    if not only:
        OUT.parent.mkdir(parents=True, exist_ok=True)
        OUT.write_text(json.dumps({"tasks": out}, indent=1) + "\n")
        print("wrote", OUT)
    assert all(math.isfinite(t["grid_optimum"]) for t in out)


if __name__ == "__main__":
    main()
