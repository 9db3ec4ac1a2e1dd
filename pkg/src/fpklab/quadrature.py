"""Adaptive Gauss-Kronrod quadrature with vectorized integrand calls.

The integrands produced by measure convolutions are cheap per point only
when evaluated on whole arrays, so this routine batches every refinement
round into a single call: the integrand receives one array holding the
nodes of all active panels.  The 15-point Kronrod rule with the embedded
7-point Gauss rule (the classic QUADPACK pair) supplies the per-panel
error estimate |K15 - G7|, which overestimates the Kronrod error and keeps
refinement conservative.  Panels whose error exceeds their width-share of
the tolerance are bisected; known breakpoints (kinks of |x|-type factors)
are seeded as initial panel boundaries so each side converges at full
order.
"""

from __future__ import annotations

import numpy as np

from .errors import NonIntegrable

_XGK = np.array([
    0.9914553711208126,
    0.9491079123427585,
    0.8648644233597691,
    0.7415311855993944,
    0.5860872354676911,
    0.4058451513773972,
    0.2077849550078985,
    0.0,
])
_WGK = np.array([
    0.0229353220105292,
    0.0630920926299785,
    0.1047900103222502,
    0.1406532597155259,
    0.1690047266392679,
    0.1903505780647854,
    0.2044329400752989,
    0.2094821410847278,
])
_WG = np.array([
    0.1294849661688697,
    0.2797053914892767,
    0.3818300505051189,
    0.4179591836734694,
])

# full symmetric node/weight vectors on [-1, 1]
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros_like(_KWEIGHTS)
_GWEIGHTS[1:-1:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _panel_sums(fvec, lo: np.ndarray, hi: np.ndarray):
    """Kronrod and Gauss sums plus an absolute-value sum for each panel."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(fvec(pts.ravel()), dtype=float).reshape(pts.shape)
    k15 = half * (vals @ _KWEIGHTS)
    g7 = half * (vals @ _GWEIGHTS)
    resabs = np.abs(half) * (np.abs(vals) @ _KWEIGHTS)
    return k15, g7, resabs


def adaptive_gauss_kronrod(
    fvec,
    a: float,
    b: float,
    *,
    epsabs: float = 1e-13,
    epsrel: float = 1e-11,
    breakpoints=(),
    max_panels: int = 4096,
    max_rounds: int = 60,
):
    """Integrate fvec over [a, b]; returns (value, error_estimate).

    ``fvec`` must map a 1-D array of nodes to the integrand values.  The
    estimate is sum of per-panel |K15 - G7| terms and is conservative for
    smooth integrands.
    """
    if not b > a:
        raise NonIntegrable("empty or inverted integration interval")
    inner = [p for p in breakpoints if a < p < b]
    edges = np.unique(np.concatenate([np.linspace(a, b, 13), np.asarray(inner, dtype=float)]))
    lo, hi = edges[:-1], edges[1:]
    k15, g7, resabs = _panel_sums(fvec, lo, hi)
    err = np.abs(k15 - g7)
    scale_floor = 1e-15 * float(np.sum(resabs))
    for _ in range(max_rounds):
        total = float(np.sum(k15))
        tol = max(epsabs, epsrel * abs(total), scale_floor)
        if float(np.sum(err)) <= tol:
            break
        share = tol * (hi - lo) / (b - a)
        bad = err > np.maximum(share, 1e-18)
        if not np.any(bad) or lo.size + np.count_nonzero(bad) > max_panels:
            break
        mid = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate([lo[~bad], lo[bad], mid])
        new_hi = np.concatenate([hi[~bad], mid, hi[bad]])
        k15_new, g7_new, _ = _panel_sums(fvec, np.concatenate([lo[bad], mid]), np.concatenate([mid, hi[bad]]))
        k15 = np.concatenate([k15[~bad], k15_new])
        g7 = np.concatenate([g7[~bad], g7_new])
        err = np.concatenate([err[~bad], np.abs(k15_new - g7_new)])
        lo, hi = new_lo, new_hi
    return float(np.sum(k15)), float(np.sum(err))
