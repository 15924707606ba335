import csv
import dataclasses
import io
import json
import math

import numpy as np
import pytest

from prefplan.ablation import (
    AGENTS,
    CSV_HEADER,
    SuiteError,
    bootstrap_ci,
    generate,
    load_suite,
    run_ablation,
    run_rollout,
    trial_prompt,
)
from prefplan.llm import Completion, FixtureStore, ReplayTransport, format_return
from prefplan.session import default_fixtures, default_suite_path


@pytest.fixture(scope="module")
def suite():
    return load_suite(default_suite_path())


@pytest.fixture(scope="module")
def generated(suite):
    return generate(suite, ReplayTransport(FixtureStore(default_fixtures())))


@pytest.fixture(scope="module")
def small(suite):
    # two tasks, one of them a conflict task; prompts stay those of the full suite
    return dataclasses.replace(suite, tasks=[suite.task("left_of_blue"), suite.task("flush_blue_then_green")])


def test_bundled_suite(suite):
    assert len(suite.tasks) == 10
    assert sum(t.conflict for t in suite.tasks) == 2
    assert [t.id for t in suite.tasks if not t.nontrivial] == ["anywhere"]
    with pytest.raises(SuiteError):
        suite.task("nope")


def test_generated_keeps_plan(suite, generated):
    assert set(generated) == {t.id for t in suite.tasks}
    for t in suite.tasks:
        assert len(generated[t.id]) == 3
        assert all(len(prefs) == len(t.plan) for prefs in generated[t.id])


def test_trial_prompts_differ_by_trial(suite):
    a, b = trial_prompt(suite, 0, 0), trial_prompt(suite, 0, 1)
    assert a.example_count == b.example_count == 3
    assert trial_prompt(suite, 0, 0).text == a.text
    assert suite.tasks[0].instruction in a.user


def test_generate_rejects_changed_plan(suite):
    class Wrong:
        def complete(self, prompt, logprobs=False):
            return Completion(format_return(["pick(blue_box)"], ["stop coexistence"], ["1.0"]))

    with pytest.raises(SuiteError, match="changed the fixed plan"):
        generate(suite, Wrong(), trials=1)


def test_rollout_is_pure(small, generated):
    a = run_rollout(small, 0, "ours", 3, 9, generated)
    b = run_rollout(small, 0, "ours", 3, 9, generated)
    assert a == b
    assert a["trial"] == 0 and a["agent"] == "ours"
    assert 0.0 <= a["pref"] <= 1.0


def test_baseline1_ignores_preferences(small, generated):
    r = run_rollout(small, 0, "baseline1", 0, 0, generated)
    assert r["trial"] is None


def test_report_outputs(small, generated, tmp_path):
    rep = run_ablation(small, AGENTS, 3, 5, generated=generated)
    text = rep.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + len(AGENTS) * 2
    # CSV means equal the means of the raw rollout log
    for row in rows[1:]:
        agent, task = row[0], row[1]
        recs = [r for r in rep.records if r["agent"] == agent and r["task"] == task]
        assert int(row[6]) == len(recs) == 3
        assert abs(float(row[2]) - sum(r["success"] for r in recs) / 3) <= 1e-12
        assert abs(float(row[3]) - sum(r["pref"] for r in recs) / 3) <= 1e-12
        assert float(row[4]) <= float(row[3]) <= float(row[5])
    files = rep.write(tmp_path)
    assert set(files) == {"csv", "json", "raw", "dat"}
    assert files["csv"].read_text() == text
    assert len(files["raw"].read_text().splitlines()) == len(rep.records)
    assert json.loads(files["json"].read_text())["seed"] == 5
    assert "# agent ours" in files["dat"].read_text()


def test_parallel_matches_serial(small, generated):
    a = run_ablation(small, ("oracle", "ours"), 2, 1, generated=generated, jobs=1)
    b = run_ablation(small, ("oracle", "ours"), 2, 1, generated=generated, jobs=2)
    assert a.to_csv() == b.to_csv()
    assert a.records_jsonl() == b.records_jsonl()


def test_run_ablation_validation(small, generated):
    with pytest.raises(ValueError):
        run_ablation(small, ("oracle", "nobody"), 1, generated=generated)
    with pytest.raises(ValueError):
        run_ablation(small, ("oracle",), 0, generated=generated)


def test_bootstrap_ci():
    rng = np.random.default_rng(0)
    lo, hi = bootstrap_ci([1.0] * 10, rng)
    assert lo == hi == 1.0
    v = np.random.default_rng(1).uniform(size=50)
    lo, hi = bootstrap_ci(v, np.random.default_rng(2))
    assert lo <= v.mean() <= hi
    # roughly the normal-theory half width
    half = 1.96 * v.std(ddof=1) / math.sqrt(len(v))
    assert (hi - lo) / 2 == pytest.approx(half, rel=0.2)
    with pytest.raises(ValueError):
        bootstrap_ci([], rng)


def test_load_suite_errors(tmp_path):
    with pytest.raises(SuiteError):
        load_suite(tmp_path / "missing.json")
    doc = json.loads(default_suite_path().read_text())
    doc["tasks"][0]["controls"] = []
    for t in doc["tasks"]:
        t["scenario"] = str(default_suite_path().parent / t["scenario"])
    p = tmp_path / "suite.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(SuiteError, match="differ in length"):
        load_suite(p)
    doc["tasks"][0]["controls"] = doc["tasks"][1]["controls"]
    doc["tasks"][1]["id"] = doc["tasks"][0]["id"]
    p.write_text(json.dumps(doc))
    with pytest.raises(SuiteError, match="duplicate"):
        load_suite(p)
