import math

import numpy as np
import pytest

from myller_geometry.core.expr import ScalarFunction, free_variables, parse, to_text
from myller_geometry.errors import EvalDomainError, ExprSyntaxError, UnknownFunction, UnknownVariable


def value(text: str, **bindings: float) -> float:
    return float(ScalarFunction.from_expression(text, bindings).eval(bindings))


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("(-2)^2", 4.0),
        ("2*3+4", 10.0),
        ("2+3*4", 14.0),
        ("8/4/2", 1.0),
        ("10-4-3", 3.0),
        ("2^-1", 0.5),
        ("-(3)", -3.0),
        ("pi", math.pi),
        ("1.5e2", 150.0),
        ("sqrt(16) + abs(-2)", 6.0),
    ],
)
def test_precedence(text: str, expected: float) -> None:
    assert value(text) == pytest.approx(expected, rel=1e-15)


def test_variables_and_functions() -> None:
    assert value("sin(x)^2 + cos(x)^2", x=0.7) == pytest.approx(1.0, abs=1e-15)
    assert value("exp(log(y))", y=3.0) == pytest.approx(3.0, rel=1e-14)


@pytest.mark.parametrize(
    ("text", "offset"),
    [
        ("2*(3+", 6),
        ("", 1),
        ("1+", 3),
        ("(1", 3),
        ("1 2", 3),
        ("3 $ 4", 3),
        ("*2", 1),
        ("sin 2", 5),
        ("1+)", 3),
        ("((1)", 5),
    ],
)
def test_error_offsets(text: str, offset: int) -> None:
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset


def test_error_reports_expected_tokens() -> None:
    with pytest.raises(ExprSyntaxError) as info:
        parse("(1")
    assert ")" in info.value.expected


def test_unknown_function_and_variable() -> None:
    with pytest.raises(UnknownFunction):
        parse("foo(1)")
    with pytest.raises(UnknownVariable):
        ScalarFunction.from_expression("x + y", ["x"])


@pytest.mark.parametrize("text", ["1/0", "log(0)", "sqrt(-1)", "asin(2)", "(-8)^0.5"])
def test_domain_errors(text: str) -> None:
    with pytest.raises(EvalDomainError):
        value(text)


def test_to_text_parses_back() -> None:
    for text in ["2^3^2", "-x^2 + sin(x*y)/3", "((x))-(-y)"]:
        ast = parse(text)
        assert parse(to_text(ast)) == ast
    assert free_variables(parse("x*sin(y) + pi")) == {"x", "y"}


def test_array_evaluation_broadcasts() -> None:
    f = ScalarFunction.from_expression("u*v + 1", ["u", "v"])
    out = f.eval({"u": np.array([1.0, 2.0]), "v": 3.0})
    np.testing.assert_allclose(out, [4.0, 7.0])


def test_dual_derivatives() -> None:
    f = ScalarFunction.from_expression("sin(t)*t^2", ["t"])
    t = 0.4
    v, d1, d2, d3 = f.eval_dual({"t": t}, "t", order=3)
    assert v == pytest.approx(math.sin(t) * t**2)
    assert d1 == pytest.approx(math.cos(t) * t**2 + 2 * t * math.sin(t))
    assert d2 == pytest.approx(-math.sin(t) * t**2 + 4 * t * math.cos(t) + 2 * math.sin(t))
    assert d3 == pytest.approx(-math.cos(t) * t**2 - 6 * t * math.sin(t) + 6 * math.cos(t))


def test_mixed_partials() -> None:
    f = ScalarFunction.from_expression("u^2*sin(v)", ["u", "v"])
    value_, f_u, f_v, f_uv = f.partials({"u": 1.5, "v": 0.3}, "u", "v")
    assert value_ == pytest.approx(2.25 * math.sin(0.3))
    assert f_u == pytest.approx(3.0 * math.sin(0.3))
    assert f_v == pytest.approx(2.25 * math.cos(0.3))
    assert f_uv == pytest.approx(3.0 * math.cos(0.3))


def _random_expression(rng: np.random.Generator, depth: int) -> str:
    if depth == 0:
        return "x" if rng.random() < 0.6 else f"{rng.uniform(0.5, 2.0):.3f}"
    choice = rng.integers(6)
    left = _random_expression(rng, depth - 1)
    if choice == 0:
        return f"({left} + {_random_expression(rng, depth - 1)})"
    if choice == 1:
        return f"({left} * {_random_expression(rng, depth - 1)})"
    if choice == 2:
        return f"sin({left})"
    if choice == 3:
        return f"exp(0.3*{left})"
    if choice == 4:
        return f"({left})^2"
    return f"({left} - {_random_expression(rng, depth - 1)})"


def test_dual_matches_finite_differences() -> None:
    rng = np.random.default_rng(7)
    h = 1e-6
    for _ in range(200):
        f = ScalarFunction.from_expression(_random_expression(rng, 3), ["x"])
        x = float(rng.uniform(0.2, 1.0))
        exact = f.eval_dual({"x": x}, "x")[1]
        approx = (f.eval({"x": x + h}) - f.eval({"x": x - h})) / (2 * h)
        assert exact == pytest.approx(approx, rel=1e-6, abs=1e-6)


def test_compose_substitutes_expressions() -> None:
    outer = ScalarFunction.from_expression("u^2 + v", ["u", "v"])
    inner = {
        "u": ScalarFunction.from_expression("cos(t)", ["t"]),
        "v": ScalarFunction.from_expression("2*t", ["t"]),
    }
    composed = outer.compose(inner, ["t"])
    assert float(composed.eval({"t": 0.5})) == pytest.approx(math.cos(0.5) ** 2 + 1.0)
