"""Tests for the interacting-particle simulator.

The draw order is part of the contract: one block of N uniforms for the
initial inverse transform (a mixture initial consumes a second block for
its normal draws), then one block of N standard normals per step.  A
manual replay of that recipe must reproduce the simulator bitwise.
"""

import numpy as np
import pytest
from scipy.special import ndtri

from fpklab.conditions import CoefficientSpec
from fpklab.errors import BlowUp, DomainError, GridMismatch
from fpklab.measures import DiscreteMeasure, GaussianMixture, discretize
from fpklab.metrics import kantorovich_wp
from fpklab.particles import SimConfig, compare_flows, simulate


def _heat_config(**kw):
    base = dict(
        coefficients=CoefficientSpec.pure_heat(),
        initial=DiscreteMeasure.dirac([0.0]),
        n_particles=64,
        dt=0.05,
        t_final=0.5,
        seed=11,
    )
    base.update(kw)
    return SimConfig(**base)


# -- config validation -------------------------------------------------


def test_config_rejects_degenerate_plans():
    with pytest.raises(DomainError):
        _heat_config(n_particles=1)
    with pytest.raises(DomainError):
        _heat_config(dt=0.7)
    with pytest.raises(DomainError):
        _heat_config(dt=0.15)
    with pytest.raises(DomainError):
        _heat_config(save_every=0)
    with pytest.raises(DomainError):
        _heat_config(dt=-0.1)
    assert _heat_config().n_steps == 10


# -- determinism and the documented draw order ------------------------


def test_simulation_is_bitwise_deterministic():
    a = simulate(_heat_config())
    b = simulate(_heat_config())
    assert np.array_equal(a.times, b.times)
    for ma, mb in zip(a.states, b.states):
        assert np.array_equal(ma.atoms, mb.atoms)
        assert np.array_equal(ma.weights, mb.weights)


def test_draw_order_replay_dirac_initial():
    config = _heat_config(n_particles=16, dt=0.25, t_final=0.5, seed=99)
    flow = simulate(config)
    rng = np.random.Generator(np.random.Philox(99))
    rng.random(16)  # the initial block; a point mass ignores its values
    x = np.zeros(16)
    for _ in range(2):
        z = rng.standard_normal(16)
        x = x + np.sqrt(2.0) * np.sqrt(0.25) * z
    final = flow.states[-1]
    expected = np.sort(x)
    assert np.allclose(np.sort(final.positions(), kind="stable"), expected, atol=0)


def test_draw_order_replay_mixture_initial():
    mix = GaussianMixture(np.array([-1.0, 2.0]), np.array([0.5, 0.5]), np.array([0.3, 0.7]))
    config = _heat_config(initial=mix, n_particles=32, dt=0.5, t_final=0.5, seed=5)
    flow = simulate(config)
    rng = np.random.Generator(np.random.Philox(5))
    u = rng.random(32)
    comp = (u > 0.3).astype(int)
    z0 = ndtri(np.clip(rng.random(32), 1e-16, 1 - 1e-16))
    x = mix.means[comp] + np.sqrt(2.0 * mix.taus[comp]) * z0
    x = x + np.sqrt(2.0) * np.sqrt(0.5) * rng.standard_normal(32)
    assert np.allclose(np.sort(flow.states[-1].positions()), np.sort(x), atol=0)


def test_frozen_diffusion_matches_exact_update():
    """With a = 0 the system is a deterministic ODE in the drift."""
    coeffs = CoefficientSpec(diffusion=0.0, drift_local="0 - x")
    config = SimConfig(
        coefficients=coeffs,
        initial=DiscreteMeasure.dirac([2.0]),
        n_particles=8,
        dt=0.01,
        t_final=1.0,
        seed=3,
    )
    flow = simulate(config)
    # Euler recursion x_{k+1} = x_k (1 - dt) from x_0 = 2
    expected = 2.0 * (1 - 0.01) ** 100
    assert np.allclose(flow.states[-1].positions(), expected, atol=1e-12)


# -- statistical behavior ---------------------------------------------


def test_pure_heat_approximates_gaussian_law():
    target = discretize(GaussianMixture(np.array([0.0]), np.array([1.0]), np.array([1.0])), 2000)
    worst = 0.0
    for seed in (1, 2, 3):
        config = _heat_config(n_particles=10_000, dt=0.05, t_final=1.0, seed=seed, save_every=20)
        flow = simulate(config)
        w1 = kantorovich_wp(flow.states[-1], target, p=1.0).value
        worst = max(worst, w1)
    assert worst <= 0.05


def test_restoring_drift_contracts_two_initial_laws():
    flows = []
    for x0 in (-2.0, 2.0):
        config = SimConfig(
            coefficients=CoefficientSpec(diffusion=1.0, drift_local="0 - x"),
            initial=DiscreteMeasure.dirac([x0]),
            n_particles=4000,
            dt=0.01,
            t_final=1.0,
            seed=17,
            save_every=25,
        )
        flows.append(simulate(config))
    curve = compare_flows(flows[0], flows[1], metric="W1")
    # matched noise: the gap contracts like 4 e^{-t} with no sampling floor
    assert curve[0, 1] == pytest.approx(4.0, abs=1e-12)
    assert np.all(np.diff(curve[:, 1]) < 0)
    assert curve[-1, 1] == pytest.approx(4.0 * np.exp(-1.0), rel=0.05)


def test_interaction_kernel_centers_the_cloud():
    config = SimConfig(
        coefficients=CoefficientSpec.interaction_example(n=1),
        initial=DiscreteMeasure.dirac([1.0]),
        n_particles=2000,
        dt=0.02,
        t_final=1.0,
        seed=7,
        save_every=50,
    )
    flow = simulate(config)
    mean_path = [float(np.dot(m.weights, m.positions())) for m in flow.states]
    # the pairwise drift preserves the center of mass in expectation
    assert abs(mean_path[-1] - 1.0) < 0.1


def test_blowup_reports_first_bad_time():
    config = SimConfig(
        coefficients=CoefficientSpec(diffusion=1.0, drift_local="x^3"),
        initial=DiscreteMeasure.dirac([3.0]),
        n_particles=16,
        dt=0.1,
        t_final=2.0,
        seed=1,
    )
    with pytest.raises(BlowUp) as err:
        simulate(config)
    assert 0.0 < err.value.time <= 2.0


# -- flow comparison ---------------------------------------------------


def test_compare_flows_intersects_time_grids():
    fast = simulate(_heat_config(dt=0.01, t_final=0.5, save_every=1, seed=2))
    slow = simulate(_heat_config(dt=0.05, t_final=0.5, save_every=2, seed=2))
    curve = compare_flows(fast, slow, metric="W1")
    assert np.allclose(curve[:, 0], [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    assert curve[0, 1] == 0.0


def test_compare_flows_rejects_disjoint_grids():
    a = simulate(_heat_config(dt=0.1, t_final=0.3, seed=2))
    b = simulate(_heat_config(dt=0.07, t_final=0.35, seed=2))
    with pytest.raises(GridMismatch):
        compare_flows(a, b)


def test_compare_flows_metric_dispatch():
    a = simulate(_heat_config(seed=4, save_every=5))
    b = simulate(_heat_config(seed=9, save_every=5))
    for metric in ("W1", "Wp", "Tp", "tp"):
        curve = compare_flows(a, b, metric=metric, p=2.0)
        assert curve.shape[1] == 2
        assert np.all(curve[:, 1] >= 0)
    from fpklab.expressions import ScalarField

    weighted = compare_flows(a, b, metric="wW", weight=ScalarField.parse("1 + x^2"))
    assert np.all(weighted[:, 1] >= 0)
    with pytest.raises(DomainError):
        compare_flows(a, b, metric="wW")
    with pytest.raises(DomainError):
        compare_flows(a, b, metric="W9")
