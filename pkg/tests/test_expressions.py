import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpklab.errors import DomainError
from fpklab.expressions import ScalarField, bump, bump_battery


def test_arithmetic_round_trip():
    f = ScalarField.parse("2 * x^2 + 3 * x - 1")
    assert f(x=2.0) == pytest.approx(2 * 4 + 6 - 1)
    xs = np.linspace(-3, 3, 7)
    assert np.allclose(f(x=xs), 2 * xs**2 + 3 * xs - 1)


def test_known_functions_match_numpy():
    xs = np.linspace(0.1, 2.0, 9)
    cases = {
        "exp(x)": np.exp(xs),
        "sqrt(x)": np.sqrt(xs),
        "abs(x)": np.abs(xs),
        "sign(x)": np.sign(xs),
        "min(x, 1)": np.minimum(xs, 1.0),
        "max(x, 1)": np.maximum(xs, 1.0),
    }
    for text, expected in cases.items():
        assert np.allclose(ScalarField.parse(text)(x=xs), expected), text


def test_unary_minus_and_precedence():
    f = ScalarField.parse("-x^2")
    assert f(x=3.0) == -9.0
    g = ScalarField.parse("(-x)^2")
    assert g(x=3.0) == 9.0
    h = ScalarField.parse("2 - -3")
    assert h(x=0.0) == 5.0


def test_power_binds_tighter_than_product():
    f = ScalarField.parse("3 * x^2")
    assert f(x=2.0) == 12.0


def test_unknown_token_rejected():
    with pytest.raises(Exception):
        ScalarField.parse("frobnicate(x)")


def test_derivative_matches_finite_difference():
    f = ScalarField.parse("exp(-x^2 / 2) * sqrt(1 + x^2) + x^3 / (1 + x^2)")
    df = f.diff()
    xs = np.linspace(-2.0, 2.0, 21)
    h = 1e-6
    fd = (f(x=xs + h) - f(x=xs - h)) / (2 * h)
    assert np.max(np.abs(df(x=xs) - fd)) < 1e-8


def test_second_derivative_matches_finite_difference():
    f = ScalarField.parse("1 / (1 + x^2)")
    d2 = f.diff().diff()
    xs = np.linspace(-2.0, 2.0, 21)
    h = 1e-4
    fd = (f(x=xs + h) - 2 * f(x=xs) + f(x=xs - h)) / h**2
    assert np.max(np.abs(d2(x=xs) - fd)) < 1e-5


def test_variables_collects_free_names():
    f = ScalarField.parse("x * t + y")
    assert f.variables == frozenset({"x", "t", "y"})
    assert ScalarField.const(4.0).variables == frozenset()


def test_missing_variable_raises():
    f = ScalarField.parse("x + t")
    with pytest.raises(Exception):
        f(x=1.0)


def test_substitute_replaces_variable_with_constant():
    f = ScalarField.parse("x * y + y^2")
    g = f.substitute(y=3.0)
    assert g.variables == frozenset({"x"})
    assert g(x=2.0) == pytest.approx(2 * 3 + 9)


def test_abs_wrapper():
    f = abs(ScalarField.parse("x"))
    assert f(x=-4.0) == 4.0


def test_identity_detection():
    assert ScalarField.parse("x").is_identity_in_x()
    assert not ScalarField.parse("x + 1").is_identity_in_x()
    assert not ScalarField.parse("2 * x").is_identity_in_x()


def test_bump_is_compactly_supported():
    f = bump(0.0, 2.0)
    assert f.support == (-2.0, 2.0)
    assert f(x=0.0) == pytest.approx(1.0)
    assert f(x=2.0) == 0.0
    assert f(x=5.0) == 0.0
    assert 0.0 < f(x=1.5) < 1.0


def test_bump_derivatives_vanish_at_the_edge():
    f = bump(0.0, 1.0)
    assert f.diff()(x=1.0) == 0.0
    assert f.diff().diff()(x=1.0) == 0.0
    # one-sided approach stays continuous
    eps = np.array([1 - 1e-4, 1 - 1e-5, 1 - 1e-6])
    assert np.all(np.abs(f.diff()(x=eps)) < 1e-2)


def test_bump_derivative_matches_finite_difference_inside():
    f = bump(0.5, 2.0)
    xs = np.linspace(-1.2, 2.2, 31)
    h = 1e-6
    fd = (f(x=xs + h) - f(x=xs - h)) / (2 * h)
    assert np.max(np.abs(f.diff()(x=xs) - fd)) < 1e-7


def test_bump_battery_shapes():
    tests = bump_battery()
    assert len(tests) == 5
    for f in tests:
        lo, hi = f.support
        assert hi - lo == pytest.approx(6.0)


def test_bump_positive_radius_required():
    with pytest.raises(DomainError):
        bump(0.0, 0.0)


def test_operator_overloads_build_fields():
    x = ScalarField.parse("x")
    f = (1 + x * x) / 2 - x
    xs = np.linspace(-1, 1, 5)
    assert np.allclose(f(x=xs), (1 + xs**2) / 2 - xs)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_parse_of_printed_constant_expressions(a, b):
    f = ScalarField.parse(f"{a!r} + {b!r} * x")
    x0 = 0.7
    assert math.isclose(f(x=x0), a + b * x0, rel_tol=1e-12, abs_tol=1e-12)


@given(st.integers(0, 6))
def test_monomial_derivative_exponent_rule(n):
    f = ScalarField.parse(f"x^{n}")
    xs = np.linspace(0.5, 2.0, 5)
    expected = n * xs ** (n - 1) if n > 0 else np.zeros_like(xs)
    assert np.allclose(f.diff()(x=xs), expected)
