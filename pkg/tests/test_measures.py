import numpy as np
import pytest
from scipy import integrate as scipy_integrate

from fpklab.errors import DomainError
from fpklab.measures import (
    DiscreteMeasure,
    GaussianMixture,
    MeasureFlow,
    abs_moment,
    discretize,
    integrate,
    signed_difference,
    weighted_tv,
)


def test_atoms_are_sorted_and_merged():
    mu = DiscreteMeasure(np.array([[2.0], [0.0], [2.0]]), np.array([0.25, 0.5, 0.25]))
    assert mu.n_atoms == 2
    assert np.allclose(mu.positions(), [0.0, 2.0])
    assert np.allclose(mu.weights, [0.5, 0.5])


def test_near_duplicates_merge():
    mu = DiscreteMeasure(np.array([[1.0], [1.0 + 1e-14]]), np.array([0.5, 0.5]))
    assert mu.n_atoms == 1
    assert mu.weights[0] == pytest.approx(1.0)


def test_dirac_and_from_points():
    d = DiscreteMeasure.dirac(1.5)
    assert d.n_atoms == 1 and d.positions()[0] == 1.5
    mu = DiscreteMeasure.from_points([3.0, -1.0], [0.5, 0.5])
    assert np.allclose(mu.positions(), [-1.0, 3.0])


def test_signed_weights_are_representable_but_not_probabilities():
    mu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([-0.5, 1.5]))
    assert not mu.is_probability
    assert mu.total_mass == pytest.approx(1.0)
    assert DiscreteMeasure.dirac(0.0).is_probability


def test_mixture_requires_positive_scale():
    with pytest.raises(DomainError):
        GaussianMixture([0.0], [0.0], [1.0])


def test_integrate_discrete_is_a_dot_product():
    mu = DiscreteMeasure.from_points([-1.0, 2.0], [0.25, 0.75])
    assert integrate(mu, lambda x: x**2) == pytest.approx(0.25 * 1 + 0.75 * 4, rel=1e-14)


@pytest.mark.parametrize("beta", [1e-6, 1e-3, 0.1, 1.0])
def test_abs_moment_of_centered_gaussian(beta):
    """E|X| for variance 2*beta is 2*sqrt(beta/pi); checked against scipy."""
    g = GaussianMixture([0.0], [beta], [1.0])
    expected = 2.0 * np.sqrt(beta / np.pi)
    assert abs_moment(g, 1.0) == pytest.approx(expected, rel=1e-11)
    sigma = np.sqrt(2.0 * beta)
    ref, _ = scipy_integrate.quad(
        lambda x: abs(x) * np.exp(-(x**2) / (2 * sigma**2)) / (sigma * np.sqrt(2 * np.pi)),
        -12 * sigma,
        12 * sigma,
        points=[0.0],
    )
    assert abs_moment(g, 1.0) == pytest.approx(ref, rel=1e-9)


def test_mixture_second_moment():
    g = GaussianMixture([1.0, -2.0], [0.5, 0.25], [0.5, 0.5])
    # E X^2 = sum w (mean^2 + 2 tau)
    expected = 0.5 * (1.0 + 1.0) + 0.5 * (4.0 + 0.5)
    assert integrate(g, lambda x: x**2) == pytest.approx(expected, rel=1e-10)


def test_integrate_kink_uses_breakpoint():
    g = GaussianMixture([3.0], [0.5], [1.0])
    val = integrate(g, np.abs)
    sigma = np.sqrt(1.0)
    ref, _ = scipy_integrate.quad(
        lambda x: abs(x) * np.exp(-((x - 3.0) ** 2) / (2 * sigma**2)) / (sigma * np.sqrt(2 * np.pi)),
        3.0 - 14,
        3.0 + 14,
        points=[0.0],
    )
    assert val == pytest.approx(ref, rel=1e-9)


def test_signed_difference_aligns_supports():
    mu = DiscreteMeasure.from_points([0.0, 1.0], [0.5, 0.5])
    sigma = DiscreteMeasure.from_points([1.0, 2.0], [0.25, 0.75])
    atoms, delta = signed_difference(mu, sigma)
    assert np.allclose(atoms.ravel(), [0.0, 1.0, 2.0])
    assert np.allclose(delta, [0.5, 0.25, -0.75])
    assert delta.sum() == pytest.approx(0.0, abs=1e-15)


def test_weighted_tv_against_direct_sum():
    mu = DiscreteMeasure.from_points([0.0, 1.0], [0.5, 0.5])
    sigma = DiscreteMeasure.from_points([1.0, 3.0], [0.5, 0.5])
    from fpklab.expressions import ScalarField

    W = ScalarField.parse("1 + x^2")
    expected = 1.0 * 0.5 + 10.0 * 0.5
    assert weighted_tv(mu, sigma, W) == pytest.approx(expected, rel=1e-14)
    assert weighted_tv(mu, mu, W) == 0.0


def test_weighted_tv_accepts_constant_weight():
    mu = DiscreteMeasure.from_points([0.0], [1.0])
    sigma = DiscreteMeasure.from_points([2.0], [1.0])
    from fpklab.expressions import ScalarField

    assert weighted_tv(mu, sigma, ScalarField.const(1.0)) == pytest.approx(2.0)


def test_discretize_preserves_symmetry_and_moments():
    g = GaussianMixture([0.0], [0.5], [1.0])
    d = discretize(g, 800)
    xs = d.positions()
    assert np.allclose(xs + xs[::-1], 0.0, atol=1e-12)
    assert abs(float(np.dot(xs, d.weights))) < 1e-12
    emp = float(np.dot(np.abs(xs), d.weights))
    assert emp == pytest.approx(2.0 * np.sqrt(0.5 / np.pi), abs=2e-3)


def test_discretize_moment_error_shrinks():
    g = GaussianMixture([0.0], [0.25], [1.0])
    target = 2.0 * np.sqrt(0.25 / np.pi)

    def err(n):
        d = discretize(g, n)
        return abs(float(np.dot(np.abs(d.positions()), d.weights)) - target)

    assert err(2000) < err(200) < err(40)


def test_flow_lookup():
    states = (DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(1.0))
    flow = MeasureFlow(np.array([0.0, 1.0]), states)
    assert len(flow) == 2
    assert flow.state_at(1.0) is states[1]
    with pytest.raises(DomainError):
        flow.state_at(0.5)
