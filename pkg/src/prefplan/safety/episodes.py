"""Randomized shield episodes used for safety checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from prefplan.safety.params import PRESETS, preset
from prefplan.safety.shield import RandomWalkHuman, ReachParams, SafetyReport, audit, verify_and_scale
from prefplan.safety.trajectory import plan_trajectory

EPISODE_SECONDS = 1.5


@dataclass
class EpisodeOutcome:
    report: SafetyReport
    preset: str
    completed: bool
    events: int


def random_episode(rng: np.random.Generator, mode: str, duration: float = EPISODE_SECONDS) -> EpisodeOutcome:
    """One short motion with a human walking at full speed towards the path."""
    name = list(PRESETS)[int(rng.integers(len(PRESETS)))]
    params = preset(name)
    reach = ReachParams()
    start = rng.uniform([0.2, -0.4, 0.9], [0.6, 0.4, 1.3])
    n = int(rng.integers(1, 3))
    wps = [start]
    for _ in range(n):
        wps.append(wps[-1] + rng.uniform(-0.3, 0.3, 3))
    traj = plan_trajectory(wps, params)
    target = wps[int(rng.integers(len(wps)))]
    heading = rng.normal(size=3)
    heading[2] = 0.0
    heading /= max(np.linalg.norm(heading), 1e-12)
    centre = target + heading * rng.uniform(0.45, 1.2)
    kp = centre + np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.3], [0.0, 0.0, 0.6]]) - [0.0, 0.0, 0.3]
    human = RandomWalkHuman(kp, reach.v_h, rng, duration + 0.5, target=target, bias=float(rng.uniform(0.3, 0.9)))
    res = verify_and_scale(traj, mode, params, reach, human, max_duration=duration)
    return EpisodeOutcome(audit(res.trajectory, human, reach), name, res.trajectory.completed, len(res.events))
