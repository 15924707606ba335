"""Write the bundled scenario documents under src/prefplan/data/scenarios."""

import json
import math
from pathlib import Path

from prefplan.geometry import Pose, quat_from_rpy

OUT = Path(__file__).resolve().parents[1] / "src" / "prefplan" / "data" / "scenarios"

DESK = {"id": "desk", "center": [0.5, 0.0, 0.75], "extents": [0.8, 1.2]}
ROBOT = {
    "ee_pose": {"position": [0.3, 0.0, 1.2], "orientation": [0.0, 1.0, 0.0, 0.0]},
    "workspace": {"center": [0.4, 0.0, 0.95], "radius": 0.75},
}
HUMAN = {
    # hand, chest, head of a person standing across the desk
    "keypoints": [[0.95, 0.1, 1.0], [1.25, 0.0, 1.3], [1.25, 0.0, 1.6]],
    "reach_radius": 0.3,
    "body_radius": 0.3,
    "max_speed": 2.0,
}

# object 5 cm below the downward-facing gripper, axis-aligned in the world
HELD_GRASP = {"position": [0.0, 0.0, 0.05], "orientation": [0.0, 1.0, 0.0, 0.0]}

HANDLE_R, HANDLE_H = 0.015, 0.12
ROD_R, ROD_H = 0.004, 0.15
# handle sits below the rod along local -z
SCREWDRIVER = {
    "type": "composite",
    "parts": [
        {
            "pose": {"position": [0.0, 0.0, 0.0]},
            "shape": {"type": "cylinder", "radius": ROD_R, "height": ROD_H},
        },
        {
            "pose": {"position": [0.0, 0.0, -0.5 * (ROD_H + HANDLE_H)]},
            "shape": {"type": "cylinder", "radius": HANDLE_R, "height": HANDLE_H},
        },
    ],
}


def rpy(roll, pitch, yaw):
    return Pose((0, 0, 0), quat_from_rpy(roll, pitch, yaw)).to_dict()["orientation"]


def lying(x, y, yaw):
    """Screwdriver lying on the desk, local +z (tip) rotated to heading ``yaw``."""
    return {"position": [x, y, 0.75 + HANDLE_R], "orientation": rpy(0.0, math.pi / 2, yaw)}


def box(oid, x, y, size, color, yaw=0.0):
    return {
        "id": oid,
        "color": color,
        "shape": {"type": "box", "extents": [size, size, size]},
        "pose": {"position": [x, y, 0.75 + size / 2], "orientation": rpy(0, 0, yaw)},
    }


def scenario(name, description, objects, human=True, held=None, jitter=None):
    doc = {
        "name": name,
        "description": description,
        "objects": objects,
        "surfaces": [DESK],
        "robot": dict(ROBOT),
        "human": HUMAN if human else None,
    }
    if held:
        doc["robot"] = dict(ROBOT, held=held)
    if jitter:
        doc["jitter"] = jitter
    return doc


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    docs = {
        "handover": scenario(
            "handover",
            "Screwdriver on the desk, handle turned 45 degrees towards the person.",
            [{"id": "screwdriver", "color": "yellow", "shape": SCREWDRIVER,
              "pose": lying(0.5, -0.1, -3 * math.pi / 4)}],
            jitter={"screwdriver": {"xy": 0.05, "yaw": 0.3}},
        ),
        "regrasp": scenario(
            "regrasp",
            "Screwdriver with its handle facing away from the person; a direct "
            "handover cannot turn it far enough, so it must be put down and regrasped.",
            [{"id": "screwdriver", "color": "yellow", "shape": SCREWDRIVER,
              "pose": lying(0.45, 0.0, 0.0)}],
        ),
        "arrangement": scenario(
            "arrangement",
            "A red box and a blue box on the desk.",
            [box("red_box", 0.45, -0.3, 0.05, "red"), box("blue_box", 0.5, 0.1, 0.06, "blue")],
            human=False,
            jitter={"red_box": {"xy": 0.05, "yaw": 0.5}, "blue_box": {"xy": 0.05, "yaw": 0.5}},
        ),
        "tabletop": scenario(
            "tabletop",
            "The robot holds a red box above the desk; a blue and a green box stand on the desk.",
            [
                box("red_box", 0.0, 0.0, 0.05, "red"),
                box("blue_box", 0.55, 0.0, 0.06, "blue"),
                box("green_box", 0.35, -0.3, 0.05, "green"),
            ],
            human=False,
            held={"object": "red_box", "grasp": HELD_GRASP},
            jitter={"blue_box": {"xy": 0.05, "yaw": 0.3}, "green_box": {"xy": 0.05, "yaw": 0.3}},
        ),
        "empty": scenario("empty", "Nothing on the desk.", [], human=False),
    }
    for name, doc in docs.items():
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
        print("wrote", OUT / f"{name}.json")


if __name__ == "__main__":
    main()
