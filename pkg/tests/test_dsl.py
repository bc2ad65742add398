import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import CORPUS
from susyfactor.dsl import (
    T_CONTEXT,
    BinOp,
    ParseError,
    depth,
    diff,
    eval_jet,
    eval_value,
    parse,
    profile_derivatives,
    to_text,
    x_context,
)
from susyfactor.taylor import DomainError

X2 = x_context(2)


@pytest.mark.parametrize("text", CORPUS)
def test_round_trip(text):
    e = parse(text, X2)
    assert parse(to_text(e), X2) == e


def test_depth_and_precedence():
    e = parse("x1^2 + x2^2", X2)
    assert depth(e) == 3
    assert isinstance(e, BinOp) and e.op == "+"
    # unary minus binds looser than ^
    assert eval_value(parse("-x1^2", X2), [[3.0, 0.0]], 0.1)[0] == -9.0
    # ^ is right associative
    assert eval_value(parse("2^3^2", X2), [[0.0, 0.0]], 0.1)[0] == 2.0**9
    # left associative - and /
    assert eval_value(parse("8 - 4 - 2", X2), [[0.0, 0.0]], 0.1)[0] == 2.0
    assert eval_value(parse("8 / 4 / 2", X2), [[0.0, 0.0]], 0.1)[0] == 1.0


def test_whitespace_insensitive():
    a = parse("x1*x2+sin( x1 )", X2)
    b = parse("  x1 * x2 \n + sin(x1)", X2)
    assert a == b


@pytest.mark.parametrize(
    "text, kind, col",
    [
        ("sin(x1*x2", "syntax", 10),
        ("x3", "identifier", 1),
        ("foo(x1)", "identifier", 1),
        ("x1 + t", "context", 6),
        ("x1^x2", "exponent", 4),
        ("bump(x1, 1)", "arity", 1),
        ("sin(x1, x2)", "arity", 1),
        ("x1 +", "syntax", 5),
        ("", "syntax", 1),
        ("x1 $ x2", "syntax", 4),
    ],
)
def test_parse_errors(text, kind, col):
    with pytest.raises(ParseError) as info:
        parse(text, X2)
    assert info.value.kind == kind
    assert info.value.line == 1
    assert info.value.col == col


def test_error_on_second_line():
    with pytest.raises(ParseError) as info:
        parse("x1 +\n  * x2", X2)
    assert (info.value.line, info.value.col) == (2, 3)


def test_t_context():
    e = parse("t^2/2 + bump(t, 0, 1)", T_CONTEXT)
    assert e is not None
    for bad in ("x1", "h*t"):
        with pytest.raises(ParseError) as info:
            parse(bad, T_CONTEXT)
        assert info.value.kind == "context"


def test_eval_examples():
    J = eval_jet(parse("x1^2+x2^2", X2), [[1.0, 2.0]], 0.1, 2)
    assert J.val[0] == 5.0
    np.testing.assert_array_equal(J.grad[0], [2.0, 4.0])
    np.testing.assert_array_equal(J.hess[0], 2 * np.eye(2))

    J = eval_jet(parse("h*x1", X2), [[3.0, 0.0]], 0.1, 1)
    assert J.val[0] == pytest.approx(0.3, abs=1e-15)
    np.testing.assert_allclose(J.grad[0], [0.1, 0.0])

    e = parse("exp(-(x1^2)/h)", X2)
    J = eval_jet(e, [[1.0, 0.0]], 0.5, 2)
    assert J.val[0] == pytest.approx(math.exp(-2.0), rel=1e-15)
    step = 1e-5
    fd = (eval_value(e, [[1 + step, 0.0]], 0.5) - eval_value(e, [[1 - step, 0.0]], 0.5)) / (2 * step)
    assert J.grad[0, 0] == pytest.approx(fd[0], rel=1e-8)


def test_evaluation_is_pure():
    X = np.random.default_rng(1).uniform(-1, 1, (50, 2))
    for text in CORPUS:
        e = parse(text, X2)
        a = eval_jet(e, X, 0.2, 3)
        b = eval_jet(e, X, 0.2, 3)
        for p, q in zip(a.parts(), b.parts()):
            assert np.array_equal(p, q)


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_value(parse("log(x1)", X2), [[-1.0, 0.0]], 0.1)
    with pytest.raises(DomainError):
        eval_value(parse("sqrt(x1 - 2)", X2), [[1.0, 0.0]], 0.1)
    with pytest.raises(DomainError):
        eval_value(parse("1/x1", X2), [[0.0, 0.0]], 0.1)


def test_bump_is_flat_at_the_joins():
    e = parse("bump(t, 0.2, 0.8)", T_CONTEXT)
    D = profile_derivatives(e, np.array([0.2, 0.8]), 3)
    np.testing.assert_allclose(D[:, 0], [1.0, 0.0])
    assert np.max(np.abs(D[:, 1:])) <= 1e-10
    # monotone decreasing, values in [0, 1]
    t = np.linspace(-1, 2, 301)
    v = profile_derivatives(e, t, 1)
    assert np.all(v[:, 1] <= 1e-14) and np.all((v[:, 0] >= 0) & (v[:, 0] <= 1))
    # the x-context jet of bump is flat at the joins too
    J = eval_jet(parse("bump(x1, 0.2, 0.8)", X2), [[0.2, 0.0], [0.8, 0.0]], 0.1, 2)
    assert np.max(np.abs(J.grad)) <= 1e-10 and np.max(np.abs(J.hess)) <= 1e-10


def test_bump_bounds_must_be_ordered():
    with pytest.raises(ParseError):
        parse("bump(t, 1, 0)", T_CONTEXT)


def test_profile_derivatives_closed_form():
    t = np.linspace(-2, 2, 11)
    D = profile_derivatives(parse("sin(t/2)/2", T_CONTEXT), t, 3)
    np.testing.assert_allclose(D[:, 0], 0.5 * np.sin(t / 2), atol=1e-15)
    np.testing.assert_allclose(D[:, 1], 0.25 * np.cos(t / 2), atol=1e-15)
    np.testing.assert_allclose(D[:, 2], -0.125 * np.sin(t / 2), atol=1e-15)
    np.testing.assert_allclose(D[:, 3], -0.0625 * np.cos(t / 2), atol=1e-15)


def test_symbolic_diff_matches_jets():
    X = np.random.default_rng(2).uniform(-1.2, 1.2, (40, 2))
    for text in CORPUS:
        e = parse(text, X2)
        J = eval_jet(e, X, 0.3, 1)
        for i in range(2):
            d = eval_value(diff(e, f"x{i + 1}"), X, 0.3)
            np.testing.assert_allclose(d, J.grad[:, i], rtol=1e-12, atol=1e-12)


_leaf = st.sampled_from(["x1", "x2", "h", "1", "2.5", "pi"])


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    calls = st.tuples(st.sampled_from(["sin", "cos", "exp", "tanh"]), children).map(lambda t: f"{t[0]}({t[1]})")
    power = st.tuples(children, st.integers(0, 3)).map(lambda t: f"{t[0]}^{t[1]}")
    return binary | calls | power | children.map(lambda s: f"-{s}")


@settings(max_examples=200, deadline=None)
@given(st.recursive(_leaf, _combine, max_leaves=8))
def test_round_trip_generated(text):
    e = parse(text, X2)
    printed = to_text(e)
    assert parse(printed, X2) == e
    X = np.array([[0.3, -0.7]])
    with np.errstate(over="ignore", invalid="ignore"):
        a = eval_value(e, X, 0.2)
        b = eval_value(parse(printed, X2), X, 0.2)
    assert np.array_equal(a, b, equal_nan=True)
