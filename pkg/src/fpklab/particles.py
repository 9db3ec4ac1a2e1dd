"""Interacting-particle approximation of the measure-valued problem.

The particle system couples N walkers through the empirical measure:

    X_i += b(mu_N, X_i) dt + sqrt(2 a(mu_N, X_i)) dW_i,

where mu_N is the equally weighted empirical measure of the current
positions and the factor 2 matches the second-derivative form of the
forward operator.  Randomness is a counter-based Philox stream with a
documented draw order, so a run is reproducible bitwise from its seed:
first the initial positions by inverse transform (one block of N uniforms,
particle major; a mixture initial consumes a second block for the
component draw), then one block of N standard normals per step, step
major.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conditions import CoefficientSpec
from .errors import BlowUp, DomainError
from .measures import DiscreteMeasure, GaussianMixture, MeasureFlow

_BLOWUP_RADIUS = 1e8


@dataclass(frozen=True)
class SimConfig:
    """Simulation plan: coefficients, initial law, grid, and seed.

    ``initial`` is a DiscreteMeasure or GaussianMixture sampled by inverse
    transform; ``save_every`` thins the recorded snapshots.  t_final must
    be an integer number of steps.
    """

    coefficients: CoefficientSpec
    initial: object
    n_particles: int
    dt: float
    t_final: float
    seed: int
    save_every: int = 1
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n_particles < 2:
            raise DomainError("need at least two particles")
        if self.dt <= 0 or self.t_final <= 0:
            raise DomainError("dt and t_final must be positive")
        if self.dt > self.t_final:
            raise DomainError("dt must not exceed t_final")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise DomainError("t_final must be an integer multiple of dt")
        if self.save_every < 1:
            raise DomainError("save_every must be at least 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


def _initial_positions(initial, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(n)
    if isinstance(initial, DiscreteMeasure):
        pos = initial.positions()
        cum = np.cumsum(initial.weights)
        cum[-1] = 1.0
        return pos[np.searchsorted(cum, u, side="right").clip(0, pos.size - 1)]
    if isinstance(initial, GaussianMixture):
        cum = np.cumsum(initial.weights)
        cum[-1] = 1.0
        comp = np.searchsorted(cum, u, side="right").clip(0, initial.means.size - 1)
        # one more uniform block, particle major, for the component draw
        z = _ndtri(rng.random(n))
        return initial.means[comp] + np.sqrt(2.0 * initial.taus[comp]) * z
    raise DomainError(f"cannot sample initial law of type {type(initial).__name__}")


def _ndtri(u: np.ndarray) -> np.ndarray:
    from scipy.special import ndtri

    return ndtri(np.clip(u, 1e-16, 1.0 - 1e-16))


def simulate(config: SimConfig) -> MeasureFlow:
    """Run the particle system and return the saved empirical measures."""
    n = config.n_particles
    rng = np.random.Generator(np.random.Philox(config.seed))
    x = _initial_positions(config.initial, n, rng)
    w = np.full(n, 1.0 / n)
    times = [0.0]
    states = [DiscreteMeasure.from_points(x, w)]
    coeffs = config.coefficients
    dt = config.dt
    sqrt_dt = np.sqrt(dt)
    for k in range(config.n_steps):
        mu = DiscreteMeasure.from_points(x, w)
        t = k * dt
        a_vals = coeffs.diffusion_values(x, t, mu)
        if np.any(a_vals < 0):
            raise DomainError("diffusion coefficient went negative along the simulation")
        b_vals = coeffs.drift_values(x, t, mu)
        z = rng.standard_normal(n)
        x = x + b_vals * dt + np.sqrt(2.0 * a_vals) * sqrt_dt * z
        if np.any(np.abs(x) > _BLOWUP_RADIUS):
            raise BlowUp((k + 1) * dt)
        if (k + 1) % config.save_every == 0 or k + 1 == config.n_steps:
            times.append((k + 1) * dt)
            states.append(DiscreteMeasure.from_points(x, w))
    return MeasureFlow(np.array(times), tuple(states))


def compare_flows(
    flow_a: MeasureFlow,
    flow_b: MeasureFlow,
    metric: str = "W1",
    p: float = 2.0,
    weight=None,
    discretization: int = 2000,
) -> np.ndarray:
    """Metric between two flows on the intersection of their time grids.

    Returns an (m, 2) array of (t, value) rows.  Times are matched to
    absolute tolerance 1e-9; grids that share fewer than two instants
    cannot be compared and raise GridMismatch.  metric: "W1", "Wp", "Tp",
    "tp" or "wW" (the last needs ``weight``).  Mixture states are
    discretized to ``discretization`` atoms first.
    """
    from .errors import GridMismatch
    from .measures import discretize
    from .metrics import fortet_mourier_Tp, fortet_mourier_tp, kantorovich_wp, weighted_dual_ww

    ta, tb = flow_a.times, flow_b.times
    ia = np.nonzero(np.abs(ta[:, None] - tb[None, :]) <= 1e-9)
    if ia[0].size < 2:
        raise GridMismatch("flow time grids share fewer than two instants")

    def as_discrete(m):
        return m if isinstance(m, DiscreteMeasure) else discretize(m, discretization)

    rows = []
    for ka, kb in zip(*ia):
        t = ta[ka]
        da, db = as_discrete(flow_a.states[ka]), as_discrete(flow_b.states[kb])
        if metric == "W1":
            val = kantorovich_wp(da, db, p=1.0).value
        elif metric == "Wp":
            val = kantorovich_wp(da, db, p=p).value
        elif metric == "Tp":
            val = fortet_mourier_Tp(da, db, p=p).value
        elif metric == "tp":
            val = fortet_mourier_tp(da, db, p=p).value
        elif metric == "wW":
            if weight is None:
                raise DomainError("metric 'wW' needs a weight function")
            val = weighted_dual_ww(da, db, weight).value
        else:
            raise DomainError(f"unknown metric {metric!r}")
        rows.append((t, val))
    return np.array(rows)
