"""Heat semigroup on measures and the nonlinearity functionals driven by it.

The kernel convention is

    Gamma(t, x) = (4 pi t)^(-1/2) exp(-x^2 / (4 t)),

the fundamental solution of d_t u = u_xx.  Its variance is 2t, not t; the
first absolute moment of Gamma(beta) * delta_0 is 2 sqrt(beta/pi).  Every
moment computation funnels through :func:`fpklab.measures.integrate`, so
the sampled curves inherit the quadrature tolerances documented there.

A :class:`FunctionalSpec` is a scalar functional a(mu) of a measure:

* ``abs_moment_power(alpha)``: (sqrt(pi)/2 * int |x| dmu)^(2 alpha),
  normalised so that a(Gamma(beta) * delta_0) = beta^alpha exactly.
* ``kernel_integral(K)``: int K dmu for a ScalarField K.
* ``custom(expr)``: an arithmetic expression over absolute moments, with
  the extra leaf ``absmom(p)`` denoting int |x|^p dmu.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .expressions import BinOp, Call, Const, Node, ScalarField, Var, _eval, _Parser
from .measures import DiscreteMeasure, GaussianMixture, Measure, abs_moment, integrate


def heat_kernel(t: float, x) -> np.ndarray:
    """Gaussian heat kernel Gamma(t, x); requires t > 0."""
    if t <= 0:
        raise DomainError("heat kernel requires t > 0")
    x = np.asarray(x, dtype=float)
    return np.exp(-(x * x) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def heat_convolve(beta: float, nu: DiscreteMeasure) -> GaussianMixture:
    """Gamma(beta) * nu as an explicit Gaussian mixture."""
    if beta <= 0:
        raise DomainError("heat-time beta must be positive")
    if nu.dim != 1:
        raise DimensionError("heat convolution is one-dimensional")
    if not nu.is_probability:
        raise DomainError("initial measure must be a probability measure")
    return GaussianMixture(
        means=nu.positions(),
        taus=np.full(nu.n_atoms, float(beta)),
        weights=nu.weights,
    )


def _moment_order(node: Node) -> float:
    """Constant value of an absmom order expression, e.g. 2/3."""
    try:
        return float(_eval(node, {}))
    except DomainError:
        raise DomainError("absmom takes a single constant order") from None


def _moments_in(node: Node) -> list[float]:
    found: list[float] = []

    def walk(n: Node) -> None:
        if isinstance(n, Call):
            if n.fn == "absmom":
                if len(n.args) != 1:
                    raise DomainError("absmom takes a single constant order")
                found.append(_moment_order(n.args[0]))
                return
            for a in n.args:
                walk(a)
        elif isinstance(n, BinOp):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, Var):
            raise DomainError("moment expressions admit no free variables")

    walk(node)
    return found


def _substitute_moments(node: Node, values: dict[float, float]) -> Node:
    if isinstance(node, Call):
        if node.fn == "absmom":
            return Const(values[_moment_order(node.args[0])])
        return Call(node.fn, tuple(_substitute_moments(a, values) for a in node.args))
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute_moments(node.left, values), _substitute_moments(node.right, values))
    return node


@dataclass(frozen=True)
class FunctionalSpec:
    """Scalar functional of a measure, used as diffusion nonlinearity."""

    kind: str
    alpha: float | None = None
    kernel: ScalarField | None = None
    expr: Node | None = None
    zero_note: str = ""
    label: str = field(default="", compare=False)

    @classmethod
    def abs_moment_power(cls, alpha: float) -> "FunctionalSpec":
        if alpha <= 0:
            raise DomainError("abs_moment_power requires alpha > 0")
        return cls(
            kind="abs_moment_power",
            alpha=float(alpha),
            zero_note="vanishes exactly on measures with zero first absolute moment, e.g. a point mass at 0",
            label=f"abs_moment_power({alpha:g})",
        )

    @classmethod
    def kernel_integral(cls, kernel: ScalarField | str, zero_note: str = "") -> "FunctionalSpec":
        if isinstance(kernel, str):
            kernel = ScalarField.parse(kernel)
        bad = kernel.variables - {"x"}
        if bad:
            raise DomainError(f"kernel may depend on x only, found {sorted(bad)}")
        return cls(kind="kernel_integral", kernel=kernel, zero_note=zero_note, label=f"kernel_integral({kernel})")

    @classmethod
    def custom(cls, expr: str, zero_note: str = "") -> "FunctionalSpec":
        node = _Parser(expr, extra_fns=frozenset({"absmom"})).parse()
        _moments_in(node)  # validates leaves
        return cls(kind="custom", expr=node, zero_note=zero_note, label=f"custom({expr})")

    @classmethod
    def from_config(cls, cfg: dict) -> "FunctionalSpec":
        kind = cfg.get("kind")
        if kind == "abs_moment_power":
            return cls.abs_moment_power(cfg["alpha"])
        if kind == "kernel_integral":
            return cls.kernel_integral(cfg["kernel"])
        if kind == "custom":
            return cls.custom(cfg["expr"])
        raise DomainError(f"unknown functional kind {kind!r}")

    # evaluation -------------------------------------------------------
    def eval_weighted(self, positions: np.ndarray, weights: np.ndarray) -> float:
        """Evaluate on raw particle arrays without building a measure."""
        if self.kind == "abs_moment_power":
            m1 = float(np.dot(weights, np.abs(positions)))
            return (0.5 * np.sqrt(np.pi) * m1) ** (2.0 * self.alpha)
        if self.kind == "kernel_integral":
            return float(np.dot(weights, np.asarray(self.kernel(x=positions), dtype=float)))
        if self.kind == "custom":
            orders = _moments_in(self.expr)
            vals = {p: float(np.dot(weights, np.abs(positions) ** p)) for p in orders}
            return float(_eval(_substitute_moments(self.expr, vals), {}))
        raise DomainError(f"unknown functional kind {self.kind!r}")

    def __call__(self, measure: Measure) -> float:
        if isinstance(measure, DiscreteMeasure):
            if measure.dim != 1:
                raise DimensionError("functionals are defined on one-dimensional measures")
            return self.eval_weighted(measure.positions(), measure.weights)
        if self.kind == "abs_moment_power":
            m1 = abs_moment(measure, 1.0)
            return (0.5 * np.sqrt(np.pi) * m1) ** (2.0 * self.alpha)
        if self.kind == "kernel_integral":
            return integrate(measure, self.kernel)
        if self.kind == "custom":
            orders = _moments_in(self.expr)
            vals = {p: abs_moment(measure, p) for p in orders}
            return float(_eval(_substitute_moments(self.expr, vals), {}))
        raise DomainError(f"unknown functional kind {self.kind!r}")


def eval_functional(a: FunctionalSpec, beta: float, nu: DiscreteMeasure) -> float:
    """f(beta) = a(Gamma(beta) * nu), the Osgood source curve."""
    return a(heat_convolve(beta, nu))


def default_beta_grid(n: int = 56) -> np.ndarray:
    return np.geomspace(1e-12, 1e-1, n)


def sample_f_curve(a: FunctionalSpec, nu: DiscreteMeasure, betas=None) -> np.ndarray:
    """Sample beta -> a(Gamma(beta) * nu) on a log grid; returns (n, 2)."""
    if betas is None:
        betas = default_beta_grid()
    betas = np.asarray(betas, dtype=float)
    if np.any(betas <= 0) or np.any(np.diff(betas) <= 0):
        raise DomainError("beta grid must be positive and strictly increasing")
    vals = np.array([eval_functional(a, b, nu) for b in betas])
    return np.column_stack([betas, vals])
