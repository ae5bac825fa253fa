import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from generators import random_expression
from hidden_dynamics import (
    DomainError, ParseError, ScalarFunction, UnboundVariableError, differentiate, evaluate, parse, substitute,
    to_string,
)
from hidden_dynamics.expressions import call


def central_difference(e, name, env, h=1e-5):
    lo, hi = dict(env), dict(env)
    lo[name] -= h
    hi[name] += h
    return (e.evaluate(hi) - e.evaluate(lo)) / (2 * h)


def test_precedence_and_associativity():
    assert parse("1+2*3").evaluate({}) == 7.0
    assert parse("2^3^2").evaluate({}) == 512.0
    assert parse("-x^2").evaluate({"x": 3.0}) == -9.0
    assert parse("(1+2)*3").evaluate({}) == 9.0
    assert parse("2e-3*x").evaluate({"x": 1000.0}) == pytest.approx(2.0)


def test_functions_and_parameters():
    env = {"x1": 0.3, "alpha": 2.0}
    assert parse("sin(x1)+cos(x1)").evaluate(env) == pytest.approx(math.sin(0.3) + math.cos(0.3))
    assert parse("exp(x1)*sqrt(alpha)").evaluate(env) == pytest.approx(math.exp(0.3) * math.sqrt(2.0))
    assert parse("tanh(x1)-log(alpha)+abs(-x1)+sign(x1)").evaluate(env) == pytest.approx(
        math.tanh(0.3) - math.log(2.0) + 0.3 + 1.0)


def test_evaluate_function_form_matches_method():
    e = parse("x*y+1")
    assert evaluate(e, {"x": 2.0, "y": 3.0}) == e.evaluate({"x": 2.0, "y": 3.0}) == 7.0


def test_to_string_round_trip():
    for text in ["x^2+3*sin(x)*y", "-(x-y)/(1+x^2)", "2^3^2", "(2^3)^2", "x-(y-1)", "exp(tanh(x))"]:
        e = parse(text)
        again = parse(to_string(e))
        for x, y in [(0.3, -0.7), (1.2, 0.4)]:
            assert again.evaluate({"x": x, "y": y}) == pytest.approx(e.evaluate({"x": x, "y": y}), rel=1e-15)


def test_derivative_of_product_with_trig():
    d = differentiate(parse("x^3*sin(x)"), "x")
    x = 0.7
    assert d.evaluate({"x": x}) == pytest.approx(3 * x * x * math.sin(x) + x ** 3 * math.cos(x), rel=1e-14)


def test_derivative_of_variable_exponent():
    d = parse("x^y").diff("x")
    assert d.evaluate({"x": 2.0, "y": 0.5}) == pytest.approx(0.5 / math.sqrt(2.0))
    d = parse("2^x").diff("x")
    assert d.evaluate({"x": 1.0}) == pytest.approx(2.0 * math.log(2.0))


def test_derivative_of_abs_and_sign():
    assert parse("abs(x)").diff("x").evaluate({"x": -2.0}) == -1.0
    assert parse("sign(x)").diff("x").evaluate({"x": 0.5}) == 0.0


def test_substitute():
    e = substitute(parse("x^2+y"), {"x": parse("y+1")})
    assert e.evaluate({"y": 2.0}) == 11.0
    assert substitute(parse("a*x"), {"a": 3.0}).evaluate({"x": 2.0}) == 6.0
    assert parse("a*x").subs({"a": 3.0}).free_variables == frozenset({"x"})


def test_free_variables_and_constants():
    assert parse("x*alpha+sin(y)").free_variables == frozenset({"x", "alpha", "y"})
    assert parse("2*3+1").is_constant
    assert not parse("2*x").is_constant


@pytest.mark.parametrize("text, position", [("2x", 1), ("1+", 2), ("(x", 2), ("foo(x)", 0)])
def test_parse_errors_carry_position(text, position):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.position == position


def test_unknown_function_message():
    with pytest.raises(ParseError, match="unknown function 'foo'"):
        parse("foo(x)")


def test_implicit_multiplication_rejected():
    with pytest.raises(ParseError, match="implicit multiplication"):
        parse("2x")


def test_unbound_variable():
    with pytest.raises(UnboundVariableError) as info:
        parse("x+z").evaluate({"x": 1.0})
    assert "z" in str(info.value)


@pytest.mark.parametrize("text, env", [("1/x", {"x": 0.0}), ("sqrt(x)", {"x": -1.0}), ("log(x)", {"x": 0.0})])
def test_domain_errors(text, env):
    with pytest.raises(DomainError):
        parse(text).evaluate(env)


def test_custom_scalar_function():
    cube = ScalarFunction("cube", lambda a: a ** 3, ScalarFunction("dcube", lambda a: 3 * a * a))
    e = parse("cube(x)+1", {"cube": cube})
    assert e.evaluate({"x": 2.0}) == 9.0
    assert differentiate(e, "x").evaluate({"x": 2.0}) == 12.0
    assert call(cube, parse("x")).evaluate({"x": -1.0}) == -1.0


def test_random_expressions_match_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(100):
        e = parse(random_expression(rng))
        for name in ("x", "y"):
            d = differentiate(e, name)
            env = {"x": rng.uniform(-1, 1), "y": rng.uniform(-1, 1)}
            sym = d.evaluate(env)
            assert abs(sym - central_difference(e, name, env)) <= 1e-6 * max(1.0, abs(sym))


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), x=st.floats(-1, 1), y=st.floats(-1, 1))
def test_property_symbolic_derivative_matches_fd(seed, x, y):
    e = parse(random_expression(np.random.default_rng(seed)))
    env = {"x": x, "y": y}
    for name in ("x", "y"):
        sym = differentiate(e, name).evaluate(env)
        assert abs(sym - central_difference(e, name, env)) <= 1e-6 * max(1.0, abs(sym))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), x=st.floats(-1, 1), y=st.floats(-1, 1))
def test_property_printing_round_trips(seed, x, y):
    e = parse(random_expression(np.random.default_rng(seed)))
    env = {"x": x, "y": y}
    assert parse(to_string(e)).evaluate(env) == pytest.approx(e.evaluate(env), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), x=st.floats(-1, 1), y=st.floats(-1, 1))
def test_property_sum_rule(seed, x, y):
    rng = np.random.default_rng(seed)
    a, b = random_expression(rng), random_expression(rng)
    env = {"x": x, "y": y}
    lhs = differentiate(parse(f"({a})+({b})"), "x").evaluate(env)
    rhs = differentiate(parse(a), "x").evaluate(env) + differentiate(parse(b), "x").evaluate(env)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
