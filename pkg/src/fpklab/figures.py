"""Figure rendering for the report paths of the command-line runners.

Every renderer takes data already computed elsewhere, draws a single
self-contained PNG next to the delimited output, and returns the path.
The CSV files remain the authoritative record; figures are a convenience
view and every runner accepts --no-plots to skip them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def set_style() -> None:
    plt.rcParams.update(
        {
            "figure.figsize": (7.0, 4.5),
            "figure.dpi": 130,
            "axes.grid": True,
            "grid.alpha": 0.3,
            "font.size": 10,
            "lines.linewidth": 1.6,
        }
    )


def _finish(fig, path: Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_f_curve(curve: np.ndarray, report, path) -> Path:
    """Log-log plot of the source curve with the fitted exponent."""
    set_style()
    fig, ax = plt.subplots()
    betas, values = curve[:, 0], curve[:, 1]
    ax.loglog(betas, values, "o-", ms=3, label="sampled f")
    anchor = values[0] * (betas / betas[0]) ** report.fitted_exponent
    ax.loglog(betas, anchor, "--", label=f"slope {report.fitted_exponent:.3f}")
    ax.set_xlabel("beta")
    ax.set_ylabel("f(beta)")
    ax.set_title(f"source curve: {report.classification}")
    ax.legend()
    return _finish(fig, path)


def plot_branches(separation: np.ndarray, time_change, path) -> Path:
    """Branch separation in W1 next to the time change tau(t)."""
    set_style()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
    ax1.plot(separation[:, 0], separation[:, 1])
    ax1.set_xlabel("t")
    ax1.set_ylabel("W1 distance")
    ax1.set_title("separation of the two branches")
    ax2.plot(time_change.times, time_change.taus)
    ax2.set_xlabel("t")
    ax2.set_ylabel("tau(t)")
    ax2.set_title("time change")
    return _finish(fig, path)


def plot_condition_grid(reports, path) -> Path:
    """Margin profiles for each checked condition over the box."""
    set_style()
    with_profile = [r for r in reports if r.profile is not None]
    n = max(1, len(with_profile))
    fig, axes = plt.subplots(1, n, figsize=(3.4 * n, 3.4), squeeze=False)
    for ax, rep in zip(axes[0], with_profile):
        ax.plot(rep.profile[:, 0], rep.profile[:, 1])
        ax.set_title(f"{rep.condition}: {'pass' if rep.passed else 'FAIL'}")
        ax.set_xlabel("x")
    if not with_profile:
        axes[0][0].set_axis_off()
        axes[0][0].text(0.5, 0.5, "no profiles", ha="center")
    return _finish(fig, path)


def plot_adjoint(sol, report, path) -> Path:
    """Space-time heat map of the backward solution plus the cutoff."""
    set_style()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
    mesh = ax1.pcolormesh(sol.x, sol.t, sol.f, shading="auto")
    fig.colorbar(mesh, ax=ax1)
    ax1.set_xlabel("x")
    ax1.set_ylabel("t")
    ax1.set_title("backward solution")
    ax2.plot(sol.x, sol.zeta, label="cutoff")
    ax2.plot(sol.x, np.abs(np.gradient(sol.f[0], sol.x, edge_order=2)), label="|f_x| at t=0")
    ax2.set_xlabel("x")
    ax2.legend()
    ax2.set_title(f"gradient margin {report.margin:.2e}")
    return _finish(fig, path)


def plot_table(table: np.ndarray, labels, path, xlabel: str = "t", title: str = "") -> Path:
    """Plot columns 1.. of a table against column 0."""
    set_style()
    fig, ax = plt.subplots()
    for j, label in enumerate(labels, start=1):
        ax.plot(table[:, 0], table[:, j], label=label)
    ax.set_xlabel(xlabel)
    ax.legend()
    ax.set_title(title)
    return _finish(fig, path)


def plot_histogram_flow(flow, path, bins: int = 60, times=None) -> Path:
    """Histograms of the empirical measure at a few saved times."""
    set_style()
    if times is None:
        idx = np.unique(np.linspace(0, len(flow.times) - 1, 4).astype(int))
    else:
        idx = [int(np.argmin(np.abs(flow.times - t))) for t in times]
    fig, ax = plt.subplots()
    for i in idx:
        state = flow.states[i]
        ax.hist(
            state.positions(),
            bins=bins,
            weights=state.weights,
            histtype="step",
            label=f"t={flow.times[i]:g}",
        )
    ax.set_xlabel("x")
    ax.set_ylabel("mass")
    ax.legend()
    ax.set_title("empirical measure over time")
    return _finish(fig, path)
