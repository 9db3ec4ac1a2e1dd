"""Tests for Osgood classification, time changes, and branch construction.

Time-change oracles are closed forms: tau' = sqrt(tau) with tau(0) = 0 has
the nontrivial solution tau(t) = t^2 / 4, and tau' = tau^{1/3} gives
tau(t) = (2 t / 3)^{3/2}.
"""

import numpy as np
import pytest

from fpklab.errors import DivergentIntegral, DomainError, GridTooCoarse, InsufficientData
from fpklab.heat import FunctionalSpec, default_beta_grid
from fpklab.measures import DiscreteMeasure, discretize
from fpklab.metrics import kantorovich_wp
from fpklab.nonuniqueness import (
    build_time_change,
    construct_branches,
    default_test_battery,
    dirac_flow_residual,
    drift_example_analysis,
    osgood_test,
    weak_form_residual,
)


def _power_curve(s: float) -> np.ndarray:
    betas = default_beta_grid()
    return np.column_stack([betas, betas**s])


# -- Osgood classification --------------------------------------------


def test_osgood_sqrt_curve_is_convergent_with_exact_integral():
    report = osgood_test(_power_curve(0.5))
    assert report.convergent
    assert report.fitted_exponent == pytest.approx(0.5, abs=1e-9)
    # int_0^0.1 beta^{-1/2} d beta = 2 sqrt(0.1)
    assert report.extrapolated_integral == pytest.approx(2 * np.sqrt(0.1), rel=1e-6)
    assert report.epsilon == pytest.approx(0.1)


def test_osgood_linear_curve_is_divergent():
    report = osgood_test(_power_curve(1.0))
    assert report.classification == "divergent"
    assert not report.convergent
    assert report.extrapolated_integral == np.inf


def test_osgood_superlinear_curve_is_divergent():
    report = osgood_test(_power_curve(1.5))
    assert report.classification == "divergent"
    assert report.extrapolated_integral == np.inf


def test_osgood_near_critical_curve_is_inconclusive():
    report = osgood_test(_power_curve(0.96))
    assert report.classification == "inconclusive"
    assert np.isfinite(report.extrapolated_integral)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_osgood_integral_estimates_shrink_with_closed_form(s):
    report = osgood_test(_power_curve(s))
    for k, est in enumerate(report.integral_estimates, start=1):
        lo = max(0.1 * 10.0**-k, 1e-12)
        exact = (0.1 ** (1 - s) - lo ** (1 - s)) / (1 - s)
        assert est == pytest.approx(exact, rel=1e-6)


def test_osgood_rejects_too_few_samples():
    betas = np.geomspace(1e-12, 1e-1, 6)
    with pytest.raises(InsufficientData):
        osgood_test(np.column_stack([betas, betas**0.5]))


def test_osgood_rejects_narrow_decade_span():
    betas = np.geomspace(1e-3, 1e-1, 20)
    with pytest.raises(InsufficientData):
        osgood_test(np.column_stack([betas, betas**0.5]))


def test_osgood_rejects_malformed_curve():
    with pytest.raises(DomainError):
        osgood_test(np.zeros((5, 3)))


# -- time changes ------------------------------------------------------


def test_time_change_sqrt_source_is_quarter_square():
    tc = build_time_change(np.sqrt, 2.0)
    ts = np.linspace(0.0, 2.0, 41)
    assert np.max(np.abs(tc(ts) - ts**2 / 4)) <= 1e-6
    assert isinstance(tc(1.0), float)
    assert tc(0.0) == 0.0


def test_time_change_cube_root_source_closed_form():
    tc = build_time_change(lambda s: s ** (1.0 / 3.0), 1.5)
    ts = np.linspace(0.0, 1.5, 31)
    assert np.max(np.abs(tc(ts) - (2 * ts / 3) ** 1.5)) <= 1e-6


def test_time_change_rate_matches_finite_difference():
    tc = build_time_change(np.sqrt, 2.0)
    h = 1e-5
    for t in (0.3, 0.9, 1.7):
        fd = (tc(t + h) - tc(t - h)) / (2 * h)
        assert tc.rate(t)[0] == pytest.approx(fd, abs=1e-5)
        assert tc.rate(t)[0] == pytest.approx(t / 2, abs=1e-6)


def test_time_change_table_is_monotone():
    tc = build_time_change(np.sqrt, 2.0)
    assert tc.times.size == tc.taus.size == 513
    assert tc.taus[0] == 0.0
    assert np.all(np.diff(tc.taus) >= 0)


@pytest.mark.parametrize("s", [1.0, 1.5])
def test_time_change_refuses_divergent_source(s):
    with pytest.raises(DivergentIntegral):
        build_time_change(lambda u: u**s, 1.0)


def test_time_change_validates_inputs():
    with pytest.raises(DomainError):
        build_time_change(np.sqrt, 0.0)
    with pytest.raises(DomainError):
        build_time_change(lambda u: -1.0, 1.0)


# -- branch pairs ------------------------------------------------------


@pytest.fixture(scope="module")
def half_power_pair():
    a = FunctionalSpec.abs_moment_power(0.5)
    return construct_branches(a, DiscreteMeasure.dirac([0.0]), 1.0, steps=200)


def test_branch_time_change_value(half_power_pair):
    assert half_power_pair.time_change(1.0) == pytest.approx(0.25, abs=1e-6)


def test_branch_osgood_report(half_power_pair):
    assert half_power_pair.osgood.convergent
    assert half_power_pair.osgood.fitted_exponent == pytest.approx(0.5, abs=1e-6)


def test_stationary_branch_weak_residual_is_exactly_zero(half_power_pair):
    res = weak_form_residual(
        half_power_pair.stationary, half_power_pair.functional, None, default_test_battery(), 1.0
    )
    assert np.max(res) == 0.0


def test_moving_branch_weak_residual_small(half_power_pair):
    res = weak_form_residual(
        half_power_pair.moving, half_power_pair.functional, None, default_test_battery(), 1.0
    )
    assert np.max(res) <= 1e-4


def test_branch_separation_matches_gaussian_first_moment(half_power_pair):
    final = discretize(half_power_pair.moving.states[-1], 2000)
    w1 = kantorovich_wp(final, half_power_pair.initial, p=1.0).value
    tau1 = half_power_pair.time_change(1.0)
    assert abs(w1 - 2 * np.sqrt(tau1 / np.pi)) <= 1e-4


def test_branches_share_time_grid(half_power_pair):
    assert np.array_equal(half_power_pair.stationary.times, half_power_pair.moving.times)
    assert half_power_pair.stationary.times.size == 201


def test_construct_branches_refuses_divergent_functional():
    a = FunctionalSpec.abs_moment_power(1.0)
    with pytest.raises(DivergentIntegral):
        construct_branches(a, DiscreteMeasure.dirac([0.0]), 1.0)


def test_construct_branches_requires_vanishing_functional():
    a = FunctionalSpec.abs_moment_power(0.5)
    with pytest.raises(DomainError):
        construct_branches(a, DiscreteMeasure.dirac([1.0]), 1.0)


def test_weak_residual_validates_time_and_tests(half_power_pair):
    a = half_power_pair.functional
    battery = default_test_battery()
    with pytest.raises(DomainError):
        weak_form_residual(half_power_pair.moving, a, None, battery, 0.0033)
    with pytest.raises(GridTooCoarse):
        weak_form_residual(half_power_pair.moving, a, None, battery, half_power_pair.moving.times[5])
    from fpklab.expressions import ScalarField

    with pytest.raises(DomainError):
        weak_form_residual(half_power_pair.moving, a, None, [ScalarField.parse("x")], 1.0)


# -- Dirac curves ------------------------------------------------------


def test_dirac_cubic_path_solves_fractional_drift():
    """x(t) = t^3 / 27 satisfies x' = |x|^{2/3}; only difference error remains."""
    b = FunctionalSpec.custom("absmom(2/3)")
    ts = np.linspace(0.0, 1.0, 401)
    assert dirac_flow_residual(lambda t: t**3 / 27.0, b, ts) < 1e-6


def test_dirac_zero_path_is_exact():
    b = FunctionalSpec.custom("absmom(2/3)")
    ts = np.linspace(0.0, 1.0, 401)
    assert dirac_flow_residual(lambda t: 0.0 * t, b, ts) == 0.0


def test_dirac_decoy_path_has_large_residual():
    b = FunctionalSpec.custom("absmom(2/3)")
    ts = np.linspace(0.0, 1.0, 401)
    assert dirac_flow_residual(lambda t: t, b, ts) >= 0.1


def test_dirac_residual_validates_grid():
    b = FunctionalSpec.custom("absmom(2/3)")
    with pytest.raises(DomainError):
        dirac_flow_residual(lambda t: t, b, np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        dirac_flow_residual(np.zeros(5), b, np.linspace(0, 1, 7))


# -- added-drift analysis ---------------------------------------------


def test_drift_analysis_root_and_slope():
    rep = drift_example_analysis()
    assert 0.0 < rep.g0 < 1.0
    assert rep.F_slope_max <= -1.0 + 1e-6
    assert rep.ode_residual <= 1e-6
    assert rep.lam == 1.0


def test_drift_analysis_scale_invariance():
    base = drift_example_analysis()
    other = drift_example_analysis(-3.5)
    assert other.g0 == base.g0
    assert other.F_slope_max == base.F_slope_max
    assert other.ode_residual == base.ode_residual
    assert other.lam == -3.5


def test_drift_analysis_rejects_zero_coupling():
    with pytest.raises(DomainError):
        drift_example_analysis(0.0)
