import json

import httpx
import numpy as np
import pytest

from golden_dsl import LEFT_OF_BLUE
from prefplan.llm import (
    Completion,
    FixtureCollision,
    FixtureError,
    FixtureStore,
    GatewayError,
    LiveTransport,
    MissingFixture,
    PromptError,
    RecordingTransport,
    ReplayTransport,
    ResponseError,
    TransportError,
    blocks,
    build_candidate_prompt,
    build_prompt,
    describe_state,
    format_return,
    line_logprobs,
    parse_response,
    prompt_hash,
    request_candidates,
    request_plan,
    select_examples,
    softmax,
    validate,
)
from prefplan.session import example_pool, instruction_examples

PLACE_LEFT = format_return(["place(red_box, desk)"], ["stop coexistence"], [LEFT_OF_BLUE])


class Scripted:
    """Transport that returns canned answers in order and keeps the prompts."""

    def __init__(self, *answers):
        self.answers = list(answers)
        self.prompts = []

    def complete(self, prompt, logprobs=False):
        self.prompts.append(prompt)
        a = self.answers.pop(0)
        return a if isinstance(a, Completion) else Completion(a)


@pytest.fixture(scope="module")
def pool():
    return example_pool()


@pytest.fixture(scope="module")
def prompt(tabletop, pool):
    return build_prompt(tabletop, "Put the red box left of the blue box.", pool[:2])


# -- prompts ------------------------------------------------------------------------


def test_prompt_sections(prompt):
    assert prompt.titles == [
        "Purpose", "Terminology", "State definition", "Primitives", "Objective",
        "Preference function signature", "Building blocks", "Example 1", "Example 2", "Instruction",
    ]
    assert prompt.example_count == 2
    assert "Instruction: Put the red box left of the blue box." in prompt.user
    assert "Expected return:" in prompt.user
    assert prompt.hash == prompt_hash(prompt.text)


def test_prompt_is_deterministic(tabletop, pool, prompt):
    again = build_prompt(tabletop, "Put the red box left of the blue box.", pool[:2])
    assert again.text == prompt.text
    assert prompt_hash(prompt.text.replace("\n", "\r\n")) == prompt.hash


def test_fixed_plan_is_embedded(tabletop, pool):
    from prefplan import world
    from prefplan.safety import Control

    p = build_prompt(tabletop, "x", pool[:1], [world.Primitive.parse("place(red_box, desk)")], [Control()])
    assert "The task plan is fixed:\nplace(red_box, desk)" in p.user
    assert "The controller parameters are fixed:\nstop coexistence" in p.user


def test_candidate_prompt_names_budget(tabletop, pool):
    p = build_candidate_prompt(tabletop, "x", pool[:1], 3)
    assert "3" in dict(p.sections)["Objective"]
    with pytest.raises(PromptError):
        build_candidate_prompt(tabletop, "x", pool[:1], 0)
    with pytest.raises(PromptError):
        build_prompt(tabletop, "x", [])


def test_describe_state(tabletop, handover):
    text = describe_state(tabletop)
    assert "Robot hand: holding red_box" in text and "held(red_box)" in text
    assert "on(blue_box, desk)" in text
    assert "Person: standing at" in describe_state(handover)


def test_select_examples(pool):
    a = select_examples(pool, pool[0].task, 3, np.random.default_rng(5))
    b = select_examples(pool, pool[0].task, 3, np.random.default_rng(5))
    assert a == b and len(a) == 3 and all(e.task != pool[0].task for e in a)
    with pytest.raises(PromptError):
        select_examples(pool[:2], "", 3, np.random.default_rng(0))
    assert instruction_examples("hello", pool) == instruction_examples("hello", pool)


def test_feedback_is_appended(prompt):
    fb = prompt.with_feedback("bad answer", ["PREF[1]: broken"])
    assert fb.system == prompt.system
    assert fb.user.endswith("Return a corrected answer in the same format.")
    assert "- PREF[1]: broken" in fb.user
    assert prompt.feedback == []


# -- responses ----------------------------------------------------------------------


def test_parse_response_roundtrip():
    r = parse_response(PLACE_LEFT)
    assert [str(p) for p in r.primitives] == ["place(red_box, desk)"]
    assert [str(c) for c in r.controls] == ["stop coexistence"]
    assert r.sources == [LEFT_OF_BLUE]
    assert len(r) == 1


def test_parse_response_tolerates_prose_and_crlf():
    text = "Sure, here it is.\r\n" + PLACE_LEFT.replace("\n", "\r\n") + "\r\nHope that helps."
    assert len(parse_response(text)) == 1


@pytest.mark.parametrize(
    "text,block",
    [
        ("no blocks at all", "PLAN"),
        (format_return(["place(red_box, desk)"], [], ["1.0"]), "CONTROL"),
        (format_return(["place(red_box, desk)"], ["stop coexistence"], []), "PREF[1]"),
        (format_return(["place(red_box, desk)"], ["stop coexistence"], ["1.0", "1.0"]), "PREF[2]"),
        (format_return(["fly(red_box)"], ["stop coexistence"], ["1.0"]), "PLAN"),
        (format_return(["place(red_box, desk)"], ["stop nobody"], ["1.0"]), "CONTROL"),
        (format_return(["place(red_box, desk)"], ["stop coexistence"], ["AND(1.0"]), "PREF[1]"),
        (PLACE_LEFT + "\n" + PLACE_LEFT, "PLAN"),
    ],
)
def test_parse_response_errors(text, block):
    with pytest.raises(ResponseError) as info:
        parse_response(text)
    assert info.value.block == block


def test_validate_scene_references(tabletop):
    r = parse_response(format_return(["place(purple_box, shelf)"], ["stop coexistence"],
                                     ["threshold(positionNorm(getPose(state, 'x'), getPose(state, 'red_box')), 0.1)"]))
    diags = validate(r, tabletop)
    assert any("unknown object 'purple_box'" in d for d in diags)
    assert any("unknown surface 'shelf'" in d for d in diags)
    assert any(d.startswith("PREF[1]") for d in diags)


# -- gateway ------------------------------------------------------------------------


def test_request_plan_reprompts_with_diagnostics(tabletop, prompt):
    bad = format_return(["place(red_box, shelf)"], ["stop coexistence"], ["1.0"])
    t = Scripted(bad, PLACE_LEFT)
    resp = request_plan(prompt, t, tabletop)
    assert len(resp) == 1
    assert len(t.prompts) == 2
    assert "unknown surface 'shelf'" in t.prompts[1].user


def test_request_plan_gives_up(tabletop, prompt):
    t = Scripted("junk", "junk", "junk")
    with pytest.raises(GatewayError) as info:
        request_plan(prompt, t, tabletop)
    assert info.value.attempts == ["junk"] * 3


def test_softmax():
    p = softmax([-0.4, -2.1, -3.5])
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert p[0] > p[1] > p[2]
    assert np.allclose(softmax([1000.0, 1000.0]), [0.5, 0.5])
    with pytest.raises(ValueError):
        softmax([])


def test_candidates_truncate_then_normalize(arrangement, pool):
    body = format_return(["pick(red_box)", "pick(blue_box)", "pick(red_box)"],
                         ["stop coexistence"] * 3, ["1.0"] * 3).replace("```PLAN", "```CANDIDATES", 1)
    t = Scripted(Completion(body, (-3.0, -0.5, -1.0)))
    prompt = build_candidate_prompt(arrangement, "x", pool[:1], 2)
    cands = request_candidates(prompt, 2, t, arrangement)
    assert [str(c.primitive) for c in cands] == ["pick(blue_box)", "pick(red_box)"]
    expect = softmax([-0.5, -1.0])
    assert [c.s_task for c in cands] == pytest.approx(list(expect), abs=1e-15)


def test_candidates_need_scores(arrangement, pool):
    body = format_return(["pick(red_box)"], ["stop coexistence"], ["1.0"]).replace("```PLAN", "```CANDIDATES", 1)
    prompt = build_candidate_prompt(arrangement, "x", pool[:1], 1)
    with pytest.raises(ResponseError):
        request_candidates(prompt, 1, Scripted(body), arrangement)
    with pytest.raises(ValueError):
        request_candidates(prompt, 0, Scripted(body), arrangement)


def test_line_logprobs():
    text = "```CANDIDATES\npick(a)\npick(b)\n```"
    toks = [("```", -0.1), ("CANDIDATES\n", -0.1), ("pick", -1.0), ("(a)\n", -0.5), ("pick(b)", -2.0), ("\n```", 0.0)]
    assert line_logprobs(text, toks) == pytest.approx([-1.5, -2.0])
    assert line_logprobs("no block", []) == []


# -- fixtures and transports --------------------------------------------------------------


def test_fixture_record_and_replay(tmp_path, prompt):
    store = FixtureStore(tmp_path)
    store.record(prompt.text, PLACE_LEFT)
    assert len(FixtureStore(tmp_path)) == 1
    replay = ReplayTransport(FixtureStore(tmp_path))
    assert replay.complete(prompt).text == PLACE_LEFT
    with pytest.raises(MissingFixture):
        replay.complete(prompt.with_feedback("x", ["y"]))


def test_fixture_collisions(tmp_path):
    store = FixtureStore(tmp_path)
    store.record("prompt a", "answer", key="same")
    with pytest.raises(FixtureCollision):
        store.record("prompt b", "answer", key="same")
    with pytest.raises(FixtureError):
        store.record("prompt c", "answer", key="../escape")


def test_corrupt_fixture_is_reported(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(FixtureError):
        len(FixtureStore(tmp_path))


def test_recording_transport(tmp_path, prompt):
    inner = Scripted(Completion(PLACE_LEFT, (-1.0,)))
    rec = RecordingTransport(inner, FixtureStore(tmp_path))
    assert rec.complete(prompt, logprobs=True).text == PLACE_LEFT
    fx = FixtureStore(tmp_path).lookup(prompt.text)
    assert fx.candidate_scores == (-1.0,)


def test_bundled_fixtures_load():
    from prefplan.session import default_fixtures

    assert len(FixtureStore(default_fixtures())) >= 30


def mock_live(handler):
    return LiveTransport("http://model.test/v1", "m", "key", client=httpx.Client(transport=httpx.MockTransport(handler)))


def test_live_transport_request_shape(prompt):
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        content = "```CANDIDATES\npick(a)\n```"
        toks = [{"token": "```CANDIDATES\n", "logprob": 0.0}, {"token": "pick(a)", "logprob": -0.7},
                {"token": "\n```", "logprob": 0.0}]
        return httpx.Response(200, json={"choices": [{"message": {"content": content},
                                                      "logprobs": {"content": toks}}]})

    out = mock_live(handler).complete(prompt, logprobs=True)
    assert seen["url"] == "http://model.test/v1/chat/completions"
    assert seen["auth"] == "Bearer key"
    assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]
    assert seen["body"]["temperature"] == 0.0 and seen["body"]["logprobs"] is True
    assert out.candidate_scores == pytest.approx((-0.7,))


@pytest.mark.parametrize("response", [httpx.Response(500), httpx.Response(200, json={"choices": []})])
def test_live_transport_errors(prompt, response):
    with pytest.raises(TransportError):
        mock_live(lambda r: response).complete(prompt)


def test_live_transport_needs_env(monkeypatch):
    monkeypatch.delenv("LLM_ENDPOINT", raising=False)
    monkeypatch.delenv("LLM_MODEL", raising=False)
    with pytest.raises(TransportError):
        LiveTransport.from_env()


def test_blocks_rejects_duplicates():
    with pytest.raises(ResponseError):
        blocks("```A\nx\n```\n```A\ny\n```")
