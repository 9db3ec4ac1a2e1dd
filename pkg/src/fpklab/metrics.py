"""Exact probability metrics on finitely supported measures.

Four metrics share one LP kernel:

* ``kantorovich_wp``   - W_p, optimal transport with cost |x-y|^p.
* ``fortet_mourier_Tp``- T_p, transport with cost
  |x-y| (1 + max{|x|^(p-1), |y|^(p-1)}).
* ``weighted_dual_ww`` - sup of integral f d(mu-sigma) over potentials on
  the union support with |f(z_i)-f(z_j)| <= |z_i-z_j| max{sqrt(W(z_i)),
  sqrt(W(z_j))}.
* ``fortet_mourier_tp``- the dual form above with W(x) = (1+|x|^(p-1))^2.

All values are exact LP optima (HiGHS), with certificates: a transport plan
for the primal metrics, the potential vector for the dual ones.  On the
real line W_p admits the monotone (quantile) coupling as the exact optimal
plan for the convex cost |x-y|^p; large one-dimensional instances take that
route so empirical measures with thousands of atoms stay cheap.  Both
routes agree to LP precision and the test-suite pins that.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import DimensionError, DomainError, InvalidWeight, SizeLimit, SolverFailure
from .expressions import ScalarField
from .measures import DiscreteMeasure, _aligned_weights

_DENSE_LIMIT = 1 << 22


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two atom sets, stored as COO triples."""

    row_atoms: np.ndarray
    col_atoms: np.ndarray
    row_idx: np.ndarray
    col_idx: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        for name in ("row_atoms", "col_atoms", "row_idx", "col_idx", "mass"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.row_atoms.shape[0], self.col_atoms.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        n, m = self.shape
        if n * m > _DENSE_LIMIT:
            raise SizeLimit("plan too large to densify")
        out = np.zeros((n, m))
        np.add.at(out, (self.row_idx, self.col_idx), self.mass)
        return out

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        n, m = self.shape
        row = np.zeros(n)
        col = np.zeros(m)
        np.add.at(row, self.row_idx, self.mass)
        np.add.at(col, self.col_idx, self.mass)
        return row, col

    def marginal_error(self, mu_w: np.ndarray, sigma_w: np.ndarray) -> float:
        row, col = self.marginals()
        return float(max(np.max(np.abs(row - mu_w)), np.max(np.abs(col - sigma_w))))

    def total_cost(self, cost_fn) -> float:
        c = cost_fn(self.row_atoms[self.row_idx], self.col_atoms[self.col_idx])
        return float(np.dot(self.mass, c))


@dataclass(frozen=True)
class MetricReport:
    """Value plus optimality certificate for one metric evaluation."""

    value: float
    certificate: object
    solver_status: str
    duality_gap: float | None = None


def _require_probability(*measures: DiscreteMeasure) -> None:
    for m in measures:
        if not isinstance(m, DiscreteMeasure):
            raise TypeError("metrics operate on DiscreteMeasure operands")
        if not m.is_probability:
            raise DomainError("metrics require probability measures")
    if len({m.dim for m in measures}) > 1:
        raise DimensionError("operands live in different dimensions")


def _pairwise_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] == 1:
        return np.abs(a[:, 0][:, None] - b[:, 0][None, :])
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _norms(a: np.ndarray) -> np.ndarray:
    return np.abs(a[:, 0]) if a.shape[1] == 1 else np.linalg.norm(a, axis=1)


def solve_transport_lp(cost: np.ndarray, mu_w: np.ndarray, sigma_w: np.ndarray):
    """Minimise <cost, P> over couplings with marginals (mu_w, sigma_w).

    Returns (value, TransportPlan, status, duality_gap).  The last column
    constraint is dropped (it is implied by the rest), which keeps the
    equality system full rank.
    """
    cost = np.asarray(cost, dtype=float)
    mu_w = np.asarray(mu_w, dtype=float)
    sigma_w = np.asarray(sigma_w, dtype=float)
    n, m = cost.shape
    if abs(mu_w.sum() - sigma_w.sum()) > 1e-9:
        raise DomainError("marginals carry different total mass")
    nm = n * m
    var = np.arange(nm)
    rows_concat = np.concatenate([var // m, n + (var % m)])
    cols_concat = np.concatenate([var, var])
    data = np.ones(2 * nm)
    a_eq = sparse.csr_matrix((data, (rows_concat, cols_concat)), shape=(n + m, nm))[: n + m - 1]
    b_eq = np.concatenate([mu_w, sigma_w[:-1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverFailure(f"transport LP failed: {res.message}")
    dual = float(np.dot(res.eqlin.marginals, b_eq)) if res.eqlin is not None else res.fun
    gap = abs(res.fun - dual)
    flat = np.maximum(res.x, 0.0)
    keep = np.nonzero(flat > 0.0)[0]
    plan = TransportPlan(
        row_atoms=np.empty((n, 0)),
        col_atoms=np.empty((m, 0)),
        row_idx=keep // m,
        col_idx=keep % m,
        mass=flat[keep],
    )
    return float(res.fun), plan, "optimal", float(gap)


def _monotone_coupling(xa: np.ndarray, wa: np.ndarray, xb: np.ndarray, wb: np.ndarray):
    """Quantile coupling of two sorted 1-D weighted atom lists."""
    ra = wa.copy()
    rb = wb.copy()
    i = j = 0
    ii: list[int] = []
    jj: list[int] = []
    mm: list[float] = []
    n, m = len(ra), len(rb)
    while i < n and j < m:
        take = min(ra[i], rb[j])
        if take > 0.0:
            ii.append(i)
            jj.append(j)
            mm.append(take)
        ra[i] -= take
        rb[j] -= take
        if ra[i] <= 1e-15:
            i += 1
        if rb[j] <= 1e-15:
            j += 1
    return np.array(ii, dtype=int), np.array(jj, dtype=int), np.array(mm)


def kantorovich_wp(mu: DiscreteMeasure, sigma: DiscreteMeasure, p: float = 1.0, method: str = "auto") -> MetricReport:
    """Kantorovich metric W_p = (min coupling cost with |x-y|^p)^(1/p).

    ``method`` is one of "auto", "lp", "monotone"; "monotone" is the exact
    quantile coupling, available in dimension 1 only, and "auto" switches
    to it for large one-dimensional instances.
    """
    _require_probability(mu, sigma)
    if p < 1:
        raise DomainError("W_p requires p >= 1")
    n, m = mu.n_atoms, sigma.n_atoms
    if method == "auto":
        method = "monotone" if (mu.dim == 1 and n * m > 4096) else "lp"
    if method == "monotone":
        if mu.dim != 1:
            raise DimensionError("monotone coupling requires dim 1")
        xa, xb = mu.positions(), sigma.positions()
        ii, jj, mm = _monotone_coupling(xa, mu.weights, xb, sigma.weights)
        value_p = float(np.dot(mm, np.abs(xa[ii] - xb[jj]) ** p))
        plan = TransportPlan(mu.atoms, sigma.atoms, ii, jj, mm)
        status, gap = "monotone-exact", None
    elif method == "lp":
        cost = _pairwise_distance(mu.atoms, sigma.atoms) ** p
        value_p, plan, status, gap = solve_transport_lp(cost, mu.weights, sigma.weights)
        plan = TransportPlan(mu.atoms, sigma.atoms, plan.row_idx, plan.col_idx, plan.mass)
    else:
        raise ValueError(f"unknown method {method!r}")
    if plan.marginal_error(mu.weights, sigma.weights) > 1e-9:
        raise SolverFailure("coupling marginals drift beyond 1e-9")
    return MetricReport(value=float(value_p) ** (1.0 / p), certificate=plan, solver_status=status, duality_gap=gap)


def fortet_mourier_Tp(mu: DiscreteMeasure, sigma: DiscreteMeasure, p: float = 2.0) -> MetricReport:
    """Coupling metric with cost |x-y| (1 + max{|x|^(p-1), |y|^(p-1)})."""
    _require_probability(mu, sigma)
    if p < 1:
        raise DomainError("T_p requires p >= 1")
    na = _norms(mu.atoms) ** (p - 1.0)
    nb = _norms(sigma.atoms) ** (p - 1.0)
    cost = _pairwise_distance(mu.atoms, sigma.atoms) * (1.0 + np.maximum(na[:, None], nb[None, :]))
    value, plan, status, gap = solve_transport_lp(cost, mu.weights, sigma.weights)
    plan = TransportPlan(mu.atoms, sigma.atoms, plan.row_idx, plan.col_idx, plan.mass)
    if plan.marginal_error(mu.weights, sigma.weights) > 1e-9:
        raise SolverFailure("coupling marginals drift beyond 1e-9")
    return MetricReport(value=value, certificate=plan, solver_status=status, duality_gap=gap)


def _weight_values(W, atoms: np.ndarray) -> np.ndarray:
    if isinstance(W, ScalarField):
        if atoms.shape[1] != 1:
            raise DimensionError("ScalarField weights require dim 1")
        vals = np.asarray(W(x=atoms[:, 0]), dtype=float)
    else:
        pts = atoms[:, 0] if atoms.shape[1] == 1 else atoms
        vals = np.asarray(W(pts), dtype=float)
    vals = np.broadcast_to(vals, (atoms.shape[0],))
    if np.any(vals < 1.0 - 1e-12):
        raise InvalidWeight(f"weight dips to {vals.min():.6g} < 1 on the support")
    return vals


def weighted_dual_ww(mu: DiscreteMeasure, sigma: DiscreteMeasure, W, *, _sqrt_w_values=None) -> MetricReport:
    """Support-restricted dual metric sup { int f d(mu-sigma) }.

    The supremum runs over potentials f on the union support obeying the
    pairwise growth constraint |f(z_i) - f(z_j)| <= |z_i - z_j|
    max{sqrt(W(z_i)), sqrt(W(z_j))}.  With W identically 1 this is the
    Kantorovich 1-metric.  The certificate is the optimal potential vector.
    """
    _require_probability(mu, sigma)
    atoms, stacked = _aligned_weights(mu, sigma)
    d = stacked[:, 0] - stacked[:, 1]
    k = atoms.shape[0]
    if k > 1500:
        raise SizeLimit("dual LP beyond 1500 support points; thin the measures first")
    if _sqrt_w_values is not None:
        sw = np.asarray(_sqrt_w_values, dtype=float)
    else:
        sw = np.sqrt(_weight_values(W, atoms))
    if k == 1:
        return MetricReport(0.0, np.zeros(1), "trivial", 0.0)
    dist = _pairwise_distance(atoms, atoms)
    iu, ju = np.triu_indices(k, 1)
    bound = dist[iu, ju] * np.maximum(sw[iu], sw[ju])
    npairs = iu.size
    rows = np.repeat(np.arange(2 * npairs), 2)
    cols = np.concatenate(np.stack([np.stack([iu, ju], axis=1), np.stack([ju, iu], axis=1)], axis=0)).ravel()
    data = np.tile([1.0, -1.0], 2 * npairs)
    a_ub = sparse.csr_matrix((data, (rows, cols)), shape=(2 * npairs, k))
    b_ub = np.concatenate([bound, bound])
    bounds = [(0.0, 0.0)] + [(None, None)] * (k - 1)
    res = linprog(-d, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverFailure(f"dual LP failed: {res.message}")
    f = res.x
    dual = float(np.dot(res.ineqlin.marginals, b_ub)) if res.ineqlin is not None else -res.fun
    gap = abs(-res.fun - (-dual))
    violation = np.max(np.abs(f[iu] - f[ju]) - bound)
    if violation > 1e-9:
        raise SolverFailure("potential violates growth constraints beyond 1e-9")
    return MetricReport(value=float(-res.fun), certificate=f, solver_status="optimal", duality_gap=float(gap))


def fortet_mourier_tp(mu: DiscreteMeasure, sigma: DiscreteMeasure, p: float = 2.0) -> MetricReport:
    """Signed-pair metric t_p, computed as w_W with W(x) = (1+|x|^(p-1))^2."""
    _require_probability(mu, sigma)
    if p < 1:
        raise DomainError("t_p requires p >= 1")
    atoms, _ = _aligned_weights(mu, sigma)
    sw = 1.0 + _norms(atoms) ** (p - 1.0)
    return weighted_dual_ww(mu, sigma, None, _sqrt_w_values=sw)


def enumerate_polytope_vertices(mu_w: np.ndarray, sigma_w: np.ndarray) -> np.ndarray:
    """All vertices of the transport polytope, exact, supports up to 4x4.

    Every vertex is the unique solution of the marginal equations on some
    nonsingular basis of n+m-1 cells; enumerating all cell subsets of that
    size and keeping the nonnegative solutions yields the full vertex set.
    """
    mu_w = np.asarray(mu_w, dtype=float)
    sigma_w = np.asarray(sigma_w, dtype=float)
    n, m = mu_w.size, sigma_w.size
    if n > 4 or m > 4:
        raise SizeLimit("vertex enumeration supports at most 4x4 instances")
    if abs(mu_w.sum() - sigma_w.sum()) > 1e-9:
        raise DomainError("marginals carry different total mass")
    nm = n * m
    r = n + m - 1
    a_full = np.zeros((n + m, nm))
    for i in range(n):
        a_full[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_full[n + j, j::m] = 1.0
    a_red = a_full[:r]
    b_red = np.concatenate([mu_w, sigma_w])[:r]
    combos = np.array(list(combinations(range(nm), r)), dtype=int)
    mats = np.moveaxis(a_red[:, combos], 1, 0)
    dets = np.linalg.det(mats)
    good = np.abs(dets) > 1e-9
    if not np.any(good):
        raise SolverFailure("no nonsingular basis found")
    sols = np.linalg.solve(mats[good], b_red[None, :, None])[..., 0]
    feasible = np.all(sols >= -1e-10, axis=1)
    verts_flat = np.zeros((int(feasible.sum()), nm))
    rows_ok = combos[good][feasible]
    np.put_along_axis(verts_flat, rows_ok, np.maximum(sols[feasible], 0.0), axis=1)
    rounded = np.round(verts_flat, 9)
    _, unique_idx = np.unique(rounded, axis=0, return_index=True)
    return verts_flat[np.sort(unique_idx)].reshape(-1, n, m)
