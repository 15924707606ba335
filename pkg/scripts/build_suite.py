"""Write the ablation task suite to src/prefplan/data/suite/ablation.json."""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "prefplan" / "data" / "suite" / "ablation.json"


def pose(obj):
    return f"getPose(next_state, '{obj}')"


def side(ref, obj, axis, near=0.12, far=0.2):
    """obj lies along ``axis`` of ref, within a bounded distance."""
    return (
        f"AND(linear(pointingInDirectionMetric({pose(ref)}, {pose(obj)}, main_axis={axis}), 0.3, 0.6, false), "
        f"linear(positionNorm({pose(obj)}, {pose(ref)}, axis=['x', 'y']), {near}, {far}, false))"
    )


def flush(a, b, lo, hi):
    """Strongly prefers touching, with a weak pull towards b from anywhere on the desk."""
    d = f"positionNorm({pose(a)}, {pose(b)}, axis=['x', 'y'])"
    return f"OR(linear({d}, {lo}, {hi}, false), AND(0.3, linear({d}, 0.0, 0.4, false)))"


ROTATED = (
    "AND(linear(rotationAngle(getPose(next_state, 'red_box'), getPose(next_state, 'blue_box'), [0, 0, 1]), 0.6, 0.7), "
    "linear(rotationAngle(getPose(next_state, 'red_box'), getPose(next_state, 'blue_box'), [0, 0, 1]), 0.87, 0.97, false))"
)
ALIGNED = (
    "linear(rotationAngle(getPose(next_state, 'red_box'), getPose(next_state, 'blue_box'), [0, 0, 1]), 0.05, 0.15, false)"
)

PLACE = ["place(red_box, desk)"]
CTRL = ["stop coexistence"]


def task(tid, instruction, oracle, plan=PLACE, controls=CTRL, conflict=False):
    return {
        "id": tid,
        "scenario": "../scenarios/tabletop.json",
        "instruction": instruction,
        "plan": plan,
        "controls": controls,
        "oracle": oracle,
        "conflict": conflict,
    }


TASKS = [
    task("left_of_blue", "Place the red box left of the blue box.", [side("blue_box", "red_box", "[0, 1, 0]")]),
    task("right_of_blue", "Put the red box to the right of the blue box.", [side("blue_box", "red_box", "[0, -1, 0]")]),
    task("front_of_blue", "Set the red box down in front of the blue box.", [side("blue_box", "red_box", "[-1, 0, 0]")]),
    task(
        "next_to_green",
        "Put the red box next to the green box.",
        ["linear(positionNorm(getPose(next_state, 'red_box'), getPose(next_state, 'green_box'), axis=['x', 'y']), 0.07, 0.1, false)"],
    ),
    task(
        "far_from_blue",
        "Keep the red box well away from the blue box.",
        ["linear(positionNorm(getPose(next_state, 'red_box'), getPose(next_state, 'blue_box'), axis=['x', 'y']), 0.35, 0.45)"],
    ),
    task("rotated_to_blue", "Place the red box turned by 45 degrees relative to the blue box.", [ROTATED]),
    task("aligned_with_blue", "Place the red box so it is aligned with the blue box.", [ALIGNED]),
    task("anywhere", "Put the red box down on the desk.", ["1.0"]),
    task(
        "flush_blue_then_green",
        "Put the red box right up against the blue box, then pick up the green box.",
        [flush("red_box", "blue_box", 0.035, 0.06)] * 2,
        plan=PLACE + ["pick(green_box)"],
        controls=CTRL * 2,
        conflict=True,
    ),
    task(
        "flush_green_then_blue",
        "Push the red box flush against the green box and then pick up the blue box.",
        [flush("red_box", "green_box", 0.03, 0.055)] * 2,
        plan=PLACE + ["pick(blue_box)"],
        controls=CTRL * 2,
        conflict=True,
    ),
]

PLANNER = {"samples": 256, "cem_iters": 3, "elite_frac": 0.1, "smoothing": 0.5}


def main():
    OUT.parent.mkdir(parents=True, exist_ok=True)
    doc = {"name": "ablation", "planner": PLANNER, "tasks": TASKS}
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print("wrote", OUT)


if __name__ == "__main__":
    main()
