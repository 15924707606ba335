import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from golden_dsl import CORPUS, LEFT_OF_BLUE, SCENE
from prefplan import world
from prefplan.dsl import (
    Catalog,
    DslArityError,
    DslCheckError,
    DslEvalError,
    DslLexError,
    DslNameError,
    DslSyntaxError,
    DslTypeError,
    EvalContext,
    diagnose,
    evaluate,
    parse,
    pretty,
    typecheck,
)


@pytest.fixture(scope="module")
def scene():
    return world.load_scenario(SCENE).state


def run(src, state, predict=None):
    ast = typecheck(parse(src), state.catalog())
    return evaluate(ast, EvalContext(state, None, predict or (lambda: state)))


@pytest.mark.parametrize("name,src,expected", CORPUS, ids=[c[0] for c in CORPUS])
def test_golden(scene, name, src, expected):
    assert run(src, scene) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("name,src,expected", CORPUS, ids=[c[0] for c in CORPUS])
def test_golden_roundtrip(name, src, expected):
    ast = parse(src)
    text = pretty(ast)
    assert parse(text) == ast
    assert pretty(parse(text)) == text


# -- random expressions ---------------------------------------------------------

OBJS = ["red_box", "blue_box", "green_box", "ee", "human"]
num = st.floats(0.0, 1.0, allow_nan=False).map(lambda v: round(v, 6))
pose = st.builds(
    lambda s, o, f: f"getPose({s}, '{o}'" + (f", '{f}')" if f else ")"),
    st.sampled_from(["state", "next_state"]),
    st.sampled_from(OBJS[:3]),
    st.sampled_from([None, "world", "blue_box"]),
)
axes = st.lists(st.sampled_from(["x", "y", "z"]), min_size=1, max_size=3, unique=True)
metric = st.one_of(
    st.builds(lambda a, b, nm, ax: f"positionNorm({a}, {b}, norm='{nm}', axis={ax!r})",
              pose, pose, st.sampled_from(["L1", "L2", "Linf"]), axes),
    st.builds(lambda a, b: f"greatCircleDistance({a}, {b})", pose, pose),
    st.builds(lambda a, b, k: f"rotationAngle({a}, {b}, {k})", pose, pose,
              st.sampled_from(["[0, 0, 1]", "[1, 0, 0]"])),
)
flag = st.sampled_from(["true", "false"])
leaf = st.one_of(
    num.map(str),
    st.builds(lambda m, t, d: f"threshold({m}, {t}, {d})", metric, num, flag),
    st.builds(lambda m, t, w, d: f"linear({m}, {t}, {t + w}, {d})", metric, num,
              st.floats(0.01, 1.0).map(lambda v: round(v, 4)), flag),
    st.builds(lambda m, mu, sd: f"normal({m}, {mu}, {sd})", metric, num,
              st.floats(0.01, 1.0).map(lambda v: round(v, 4))),
)
prob = st.recursive(
    leaf,
    lambda kids: st.builds(lambda op, a, b: f"{op}({a}, {b})", st.sampled_from(["AND", "OR"]), kids, kids),
    max_leaves=6,
)


@settings(max_examples=200, deadline=None)
@given(prob)
def test_random_roundtrip(src):
    ast = parse(src)
    text = pretty(ast)
    assert parse(text) == ast
    assert pretty(parse(text)) == text


@settings(max_examples=200, deadline=None)
@given(prob)
def test_random_values_are_probabilities(src):
    state = world.load_scenario(SCENE).state
    v = run(src, state)
    assert 0.0 <= v <= 1.0


@given(num, num)
def test_or_and_laws(p1, p2):
    a = evaluate(parse(f"AND({p1}, {p2})"), EvalContext(None))
    o = evaluate(parse(f"OR({p1}, {p2})"), EvalContext(None))
    assert a == pytest.approx(p1 * p2, abs=1e-12)
    assert o == pytest.approx(1 - (1 - p1) * (1 - p2), abs=1e-12)


# -- transfer functions -----------------------------------------------------------


@pytest.mark.parametrize(
    "src,expected",
    [
        ("threshold(0.5, 0.5)", 1.0),
        ("threshold(0.49, 0.5)", 0.0),
        ("threshold(0.5, 0.5, false)", 0.0),
        ("linear(0.1, 0.2, 0.4)", 0.0),
        ("linear(0.2, 0.2, 0.4)", 0.0),
        ("linear(0.3, 0.2, 0.4)", 0.5),
        ("linear(0.4, 0.2, 0.4)", 1.0),
        ("linear(0.3, 0.2, 0.4, false)", 0.5),
        ("linear(0.9, 0.2, 0.4, false)", 0.0),
        ("normal(0.3, 0.3, 0.1)", 0.5),
        ("normal(0.4, 0.3, 0.1)", 0.5 * math.erfc(-1 / math.sqrt(2))),
        ("normal(0.4, 0.3, 0.1, false)", 0.5 * math.erfc(1 / math.sqrt(2))),
    ],
)
def test_transfer_functions(src, expected):
    assert evaluate(parse(src), EvalContext(None)) == pytest.approx(expected, abs=1e-12)


def test_normal_flipped_tail_keeps_precision():
    v = evaluate(parse("normal(0.0, 1.0, 0.1, false)"), EvalContext(None))
    assert v == pytest.approx(1.0, abs=1e-12)
    v = evaluate(parse("normal(1.0, 0.0, 0.1, false)"), EvalContext(None))
    assert 0.0 < v < 1e-20


# -- errors -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "src,err",
    [
        ("AND(0.5)", DslArityError),
        ("AND(0.5, 0.2, 0.1)", DslArityError),
        ("linear(0.3, 0, 1, direction=false, t_1=0.1)", DslArityError),
        ("foo(1)", DslNameError),
        ("AND(0.5, 0.2", DslSyntaxError),
        ("$", DslLexError),
        ("linear(0.5, 'a', 1)", DslTypeError),
        ("getPose(state, 'red_box')", DslTypeError),
        ("positionNorm(getPose(state, 'a'), getPose(state, 'b'))", DslTypeError),
    ],
)
def test_parse_errors(src, err):
    with pytest.raises(err) as info:
        parse(src)
    assert info.value.line >= 1 and info.value.col >= 1


def test_keyword_arguments_and_trailing_comma():
    assert parse("linear(0.3, t_2=1, t_1=0)") == parse("linear(0.3, 0, 1)")
    assert parse("AND(0.5, 0.2,)") == parse("AND(0.5, 0.2)")


def test_default_parameters_print_as_keywords():
    text = pretty(parse("threshold(positionNorm(getPose(state, 'a'), getPose(state, 'b')), 0.1)"))
    assert "frame='world'" in text and "norm='L2'" in text and "direction=true" in text


@pytest.mark.parametrize(
    "src,kind",
    [
        ("1.5", "range violation"),
        ("linear(0.3, 1, 0)", "range violation"),
        ("normal(0.5, 0.1, 0)", "range violation"),
        ("threshold(positionNorm(getPose(state, 'x'), getPose(state, 'a')), 0.1)", "unknown object"),
        ("threshold(positionNorm(getPose(state, 'a', 'nowhere'), getPose(state, 'a')), 0.1)", "unknown frame"),
    ],
)
def test_diagnostics(src, kind):
    diags = diagnose(parse(src), Catalog({"a", "b"}))
    assert [d.kind for d in diags] == [kind]
    with pytest.raises(DslCheckError):
        typecheck(parse(src), Catalog({"a", "b"}))


def test_diagnose_without_catalog_skips_names():
    assert diagnose(parse("threshold(positionNorm(getPose(state, 'x'), getPose(state, 'y')), 0.1)")) == []


def test_next_state_is_predicted_once(scene):
    calls = []

    def predict():
        calls.append(1)
        return scene

    ctx = EvalContext(scene, None, predict)
    src = f"AND({LEFT_OF_BLUE}, {LEFT_OF_BLUE})"
    evaluate(typecheck(parse(src), scene.catalog()), ctx)
    assert len(calls) == 1


def test_missing_predictor_raises(scene):
    with pytest.raises(DslEvalError):
        evaluate(parse(LEFT_OF_BLUE), EvalContext(scene))


def test_degenerate_metric_raises(scene):
    src = "threshold(pointingInDirectionMetric(getPose(state, 'red_box'), getPose(state, 'red_box')), 0.1)"
    with pytest.raises(DslEvalError):
        run(src, scene)


def test_left_of_uses_successor(scene):
    # move red to the right of blue (negative y) in the predicted state
    red = scene.objects["red_box"]
    moved = scene.with_objects(red_box=red.moved(type(red.pose)((0.5, -0.3, 0.775), (1, 0, 0, 0))))
    assert run(LEFT_OF_BLUE, scene, lambda: moved) == 0.0
    assert run(LEFT_OF_BLUE, scene) == 1.0
