import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svoc.expr import (
    ExpressionError,
    NonSmoothWarning,
    differentiate,
    parse_expression,
)


def ev(text, **env):
    return parse_expression(text).evaluate(**env)


def test_literals_and_arithmetic():
    assert ev("3") == 3.0
    assert ev("2 + 3*4") == 14.0
    assert ev("(2 + 3)*4") == 20.0
    assert ev("7/2") == 3.5
    assert ev("2^3^2") == 512.0  # right associative
    assert ev("-2^2") == -4.0    # unary minus binds looser than power
    assert ev("2**3") == 8.0
    assert ev("1.5e-2") == 0.015


def test_variables_and_functions():
    assert ev("t*y*u", t=2.0, y=3.0, u=4.0) == 24.0
    assert ev("sqrt(t)", t=9.0) == 3.0
    assert ev("exp(0) + cos(0)") == 2.0
    assert math.isclose(ev("log(t)", t=math.e), 1.0)
    assert ev("abs(-3)") == 3.0


def test_evaluate_broadcasts_over_arrays():
    t = np.linspace(0.0, 1.0, 5)
    out = ev("1 + t*sqrt(t)", t=t)
    assert np.allclose(out, 1.0 + t**1.5)


def test_missing_binding_is_reported():
    with pytest.raises(ExpressionError, match="no value supplied for variable 'y'"):
        ev("y + 1")


@pytest.mark.parametrize("source, position", [
    ("2 +", 3),
    ("2 + * 3", 4),
    ("sqrt(2", 6),
    ("foo(2)", 0),
    ("2 @ 3", 2),
    ("sqrt(1, 2)", 0),
    ("w", 0),
    ("sqrt", 0),
    ("1 2", 2),
])
def test_parse_errors_carry_positions(source, position):
    with pytest.raises(ExpressionError) as err:
        parse_expression(source)
    assert err.value.position == position
    assert f"position {position}" in str(err.value)


def test_empty_expression_rejected():
    with pytest.raises(ExpressionError, match="empty"):
        parse_expression("   ")


def test_free_vars():
    assert parse_expression("t*y*u").free_vars() == {"t", "y", "u"}
    assert parse_expression("3.5").free_vars() == frozenset()
    assert parse_expression("sqrt(s) + s").free_vars() == {"s"}


@pytest.mark.parametrize("source, var, point, expected", [
    ("y^2", "y", {"y": 3.0}, 6.0),
    ("t*y*u", "u", {"t": 2.0, "y": 5.0, "u": 0.0}, 10.0),
    ("y*u", "y", {"y": 1.0, "u": 7.0}, 7.0),
    ("exp(2*y)", "y", {"y": 0.5}, 2.0 * math.e),
    ("sqrt(y)", "y", {"y": 4.0}, 0.25),
    ("log(y)", "y", {"y": 5.0}, 0.2),
    ("sin(y)", "y", {"y": 0.0}, 1.0),
    ("cos(y)", "y", {"y": math.pi / 2}, -1.0),
    ("y/u", "u", {"y": 6.0, "u": 2.0}, -1.5),
    ("u^3", "u", {"u": 2.0}, 12.0),
    ("y^y", "y", {"y": 2.0}, 4.0 * (math.log(2.0) + 1.0)),
    ("2^u", "u", {"u": 3.0}, 8.0 * math.log(2.0)),
])
def test_differentiate_rules(source, var, point, expected):
    d = differentiate(parse_expression(source), var)
    assert math.isclose(d.evaluate(**point), expected, rel_tol=1e-12)


def test_second_derivatives_fold_constants():
    d2 = differentiate(differentiate(parse_expression("y^2"), "y"), "y")
    assert d2.evaluate() == 2.0
    assert str(d2) == "2"
    zero = differentiate(parse_expression("t*u"), "y")
    assert str(zero) == "0"


def test_differentiate_only_accepts_state_and_control():
    e = parse_expression("t*y")
    with pytest.raises(ExpressionError, match="y or u"):
        differentiate(e, "t")
    with pytest.raises(ExpressionError):
        differentiate(e, "x")


def test_abs_derivative_warns_and_uses_sign():
    with pytest.warns(NonSmoothWarning, match="abs"):
        d = differentiate(parse_expression("abs(u)"), "u")
    assert d.evaluate(u=3.0) == 1.0
    assert d.evaluate(u=-3.0) == -1.0


def test_smooth_derivatives_do_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        differentiate(parse_expression("y^2 + u*cos(t)"), "u")


grammar_leaves = st.sampled_from(["t", "s", "y", "u", "1", "2", "0.5", "3.25"])


@st.composite
def expression_strings(draw, depth=3):
    if depth == 0:
        return draw(grammar_leaves)
    kind = draw(st.integers(0, 6))
    if kind <= 1:
        return draw(grammar_leaves)
    a = draw(expression_strings(depth=depth - 1))
    b = draw(expression_strings(depth=depth - 1))
    if kind == 2:
        return f"({a} + {b})"
    if kind == 3:
        return f"({a} - {b})"
    if kind == 4:
        return f"({a}*{b})"
    if kind == 5:
        return f"({a}/({b} + 4))"
    return f"{draw(st.sampled_from(['sin', 'cos', 'exp']))}({a})"


@given(expression_strings())
@settings(deadline=None, max_examples=80)
def test_str_round_trips_through_parser(source):
    tree = parse_expression(source)
    again = parse_expression(str(tree))
    env = {"t": 0.7, "s": 0.3, "y": 1.2, "u": -0.8}
    assert math.isclose(tree.evaluate(**env), again.evaluate(**env),
                        rel_tol=1e-12, abs_tol=1e-12)


@given(expression_strings(), st.sampled_from(["y", "u"]))
@settings(deadline=None, max_examples=60)
def test_derivative_str_round_trips(source, var):
    d = differentiate(parse_expression(source), var)
    again = parse_expression(str(d))
    env = {"t": 0.7, "s": 0.3, "y": 1.2, "u": -0.8}
    assert math.isclose(d.evaluate(**env), again.evaluate(**env),
                        rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
@settings(deadline=None, max_examples=60)
def test_derivative_matches_finite_differences(y, u):
    e = parse_expression("y^2*u + exp(0.3*y) - u^3")
    d = differentiate(e, "y")
    step = 1e-6
    fd = (e.evaluate(y=y + step, u=u) - e.evaluate(y=y - step, u=u)) / (2 * step)
    assert math.isclose(d.evaluate(y=y, u=u), fd, rel_tol=1e-6, abs_tol=1e-6)
