import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from golden_dsl import LEFT_OF_BLUE
from prefplan import world
from prefplan.dsl import parse, typecheck
from prefplan.planner import (
    Candidate,
    PlannerConfig,
    PlanningError,
    PlanningFailed,
    Skeleton,
    StepError,
    greedy_step,
    plan_and_execute,
    score_plan,
    shoot,
)
from prefplan.safety import Control

FAST = PlannerConfig(samples=64, cem_iters=2, seed=0)
P = world.Primitive.parse


def pref(src, state):
    return typecheck(parse(src), state.catalog())


def place_skeleton(state, src=None):
    return Skeleton((P("place(red_box, desk)"),), (None if src is None else pref(src, state),))


def test_config_validation():
    for kw in ({"samples": 0}, {"elite_frac": 0.0}, {"epsilon": 0.0}, {"c_task": 1.5},
               {"smoothing": 1.0}, {"candidates": 0}):
        with pytest.raises(ValueError):
            PlannerConfig(**kw)
    assert PlannerConfig(c_task=0.5, c_ctrl=0.5).scale == 0.25


def test_skeleton_validation():
    with pytest.raises(ValueError):
        Skeleton((), ())
    with pytest.raises(ValueError):
        Skeleton((P("pick(red_box)"),), (None, None))
    sk = Skeleton((P("pick(red_box)"), P("place(red_box, desk)")), (None, None))
    assert sk.dims == [4, 3]
    assert [len(a) for a in sk.split(np.zeros(7))] == [4, 3]
    assert sk.controls == (Control(), Control())


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=7, max_size=7))
def test_score_plan_factors(arrangement, flat):
    sk = Skeleton(
        (P("pick(red_box)"), P("place(red_box, desk)")),
        (None, pref("linear(positionNorm(getPose(next_state, 'red_box'), getPose(next_state, 'blue_box')), "
                    "0.1, 0.3)", arrangement)),
    )
    rec = score_plan(arrangement, sk, sk.split(np.array(flat)), PlannerConfig(c_task=0.9))
    assert len(rec.q) == len(rec.f) == 2 and len(rec.states) == 3
    assert rec.product == pytest.approx(0.9 * math.prod(rec.q) * math.prod(rec.f), abs=1e-15)
    assert rec.f[0] == 1.0
    assert all(ok for q, ok in zip(rec.q, rec.hard_ok) if q > 0)


def test_score_plan_rejects_wrong_length(arrangement):
    sk = Skeleton((P("pick(red_box)"),), (None,))
    with pytest.raises(ValueError):
        score_plan(arrangement, sk, [])


def test_step_error_on_precondition(arrangement):
    sk = Skeleton((P("pick(red_box)"), P("pick(blue_box)")), (None, None))
    with pytest.raises(StepError) as info:
        score_plan(arrangement, sk, [np.zeros(4), np.zeros(4)])
    assert info.value.index == 1
    with pytest.raises(StepError):
        shoot(arrangement, Skeleton((P("place(red_box, desk)"),), (None,)), FAST)


def test_shoot_deterministic(tabletop):
    sk = place_skeleton(tabletop, LEFT_OF_BLUE)
    a = shoot(tabletop, sk, FAST)
    b = shoot(tabletop, sk, FAST)
    assert a.objective == b.objective
    assert np.array_equal(np.concatenate(a.actions), np.concatenate(b.actions))
    assert a.evaluations == 64 * 3


def test_shoot_result_matches_rescoring(tabletop):
    res = shoot(tabletop, place_skeleton(tabletop, LEFT_OF_BLUE), FAST)
    assert res.objective == res.record.product
    assert res.objective == score_plan(tabletop, res.skeleton, res.actions).product
    assert res.history == sorted(res.history)
    assert res.history[-1] == res.objective
    assert res.objective > 0.5


def test_shoot_sum_scoring(tabletop):
    res = shoot(tabletop, place_skeleton(tabletop, LEFT_OF_BLUE), FAST, scoring="sum")
    assert res.objective == pytest.approx(sum(res.q) + sum(res.f))
    with pytest.raises(ValueError):
        shoot(tabletop, place_skeleton(tabletop), FAST, scoring="max")


def test_shoot_zero_preference(tabletop):
    res = shoot(tabletop, place_skeleton(tabletop, "0.0"), FAST)
    assert res.objective == 0.0


def test_to_dict_is_json_ready(tabletop):
    import json

    res = shoot(tabletop, place_skeleton(tabletop, LEFT_OF_BLUE), FAST)
    d = json.loads(json.dumps(res.to_dict()))
    assert d["steps"][0]["primitive"] == "place(red_box, desk)"
    assert "elapsed" not in d
    assert "elapsed" in res.to_dict(timing=True)


def test_greedy_prefers_better_candidate(arrangement):
    far = pref("linear(positionNorm(getPose(next_state, 'ee'), getPose(next_state, 'blue_box')), 5.0, 6.0)",
               arrangement)
    cands = [Candidate(P("pick(red_box)"), 0.5, far), Candidate(P("pick(blue_box)"), 0.4)]
    choice = greedy_step(arrangement, cands, FAST)
    assert choice.index == 1
    assert choice.scores[0] == 0.0
    assert choice.objective == pytest.approx(0.4 * choice.result.objective)


def test_greedy_ties_go_to_first(arrangement):
    cands = [Candidate(P("pick(red_box)"), 0.5), Candidate(P("pick(red_box)"), 0.5)]
    assert greedy_step(arrangement, cands, FAST).index == 0


def test_greedy_skips_inapplicable(arrangement):
    cands = [Candidate(P("place(red_box, desk)"), 1.0), Candidate(P("pick(red_box)"), 0.2)]
    choice = greedy_step(arrangement, cands, FAST)
    assert choice.index == 1 and choice.scores[0] == 0.0
    with pytest.raises(PlanningError):
        greedy_step(arrangement, cands[:1], FAST)


def test_greedy_validation(arrangement):
    c = Candidate(P("pick(red_box)"), 0.5)
    with pytest.raises(ValueError):
        greedy_step(arrangement, [], FAST)
    with pytest.raises(ValueError):
        greedy_step(arrangement, [c] * 4, FAST)
    with pytest.raises(ValueError):
        greedy_step(arrangement, [Candidate(P("pick(red_box)"), 0.0)], FAST)


def test_plan_and_execute_direct(tabletop):
    sk = place_skeleton(tabletop, LEFT_OF_BLUE)
    seen = []
    ex = plan_and_execute(tabletop, lambda s: sk, None, FAST, verify=lambda k, a, b: seen.append(k) or k)
    assert ex.greedy_steps == 0
    assert [str(s.primitive) for s in ex.executed] == ["place(red_box, desk)"]
    assert len(seen) == 1
    assert [t["event"] for t in ex.trace] == ["shoot", "execute"]


def test_plan_and_execute_greedy_then_replan(arrangement):
    # an impossible first skeleton forces a greedy pick, after which placing works
    impossible = Skeleton((P("pick(red_box)"),), (pref("0.0", arrangement),))
    place = Skeleton((P("place(red_box, desk)"),), (None,))

    def skeletons(state):
        return place if state.robot.held else impossible

    def candidates(state, budget):
        return [Candidate(P("pick(red_box)"), 0.9)]

    ex = plan_and_execute(arrangement, skeletons, candidates, FAST)
    assert ex.greedy_steps == 1
    assert [str(s.primitive) for s in ex.executed] == ["pick(red_box)", "place(red_box, desk)"]
    assert [t["event"] for t in ex.trace] == ["shoot", "greedy", "shoot", "execute"]
    assert ex.trace[1]["applied"] is True
    assert ex.final_state.robot.held is None


def test_plan_and_execute_exhausts_budget(arrangement):
    impossible = Skeleton((P("pick(red_box)"),), (pref("0.0", arrangement),))
    cands = [Candidate(P("pick(red_box)"), 0.9, pref("0.0", arrangement))]
    cfg = PlannerConfig(samples=16, cem_iters=0, max_greedy=2)
    with pytest.raises(PlanningFailed) as info:
        plan_and_execute(arrangement, lambda s: impossible, lambda s, k: cands, cfg)
    greedy = [t for t in info.value.trace if t["event"] == "greedy"]
    # a zero-objective greedy step is recorded but never applied
    assert len(greedy) == 2 and not any(g["applied"] for g in greedy)
    assert info.value.trace[-1]["event"] == "fail"
