"""Command-line runners for the measure laboratory.

Config-driven commands validate their JSON input against the bundled
schema (``schemas/experiment.json``; unknown keys are rejected at every
level).  Each report path writes comma-delimited CSV files with '.'
decimal points and LF line endings, a JSON report carrying a ``pass``
flag, and PNG figures next to the delimited output unless ``--no-plots``
is given.  The CSV files are the authoritative record.

Exit codes: 0 success, 1 usage or configuration error, 2 a computation
that ran and failed its check.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import ValidationError
from jsonschema import validate as _validate

from .adjoint import (
    heat_battery,
    max_principle_overshoot,
    ou_battery,
    richardson_ratio,
    solve_backward,
    verify_gradient_bound,
)
from .conditions import (
    CoefficientSpec,
    FieldKernel,
    LyapunovTriple,
    PowerDifferenceKernel,
    check_DH,
    check_H,
)
from .errors import FpkError
from .expressions import ScalarField
from .heat import FunctionalSpec, sample_f_curve
from .measures import DiscreteMeasure, GaussianMixture
from .metrics import fortet_mourier_Tp, fortet_mourier_tp, kantorovich_wp, weighted_dual_ww
from .nonuniqueness import (
    branch_separation,
    construct_branches,
    default_test_battery,
    dirac_flow_residual,
    drift_example_analysis,
    osgood_test,
    weak_form_residual,
)
from .particles import SimConfig, simulate


class _UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 1."""


@contextlib.contextmanager
def _config_phase():
    """Translate errors while reading configuration into usage errors."""
    try:
        yield
    except _UsageError:
        raise
    except (OSError, json.JSONDecodeError, ValidationError, FpkError, KeyError, ValueError, TypeError) as exc:
        detail = getattr(exc, "message", None) or str(exc)
        raise _UsageError(detail) from exc


def _schema() -> dict:
    text = resources.files("fpklab").joinpath("schemas/experiment.json").read_text()
    return json.loads(text)


def _load_config(path: str) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    _validate(cfg, _schema())
    return cfg


def _measure_from_config(obj: dict):
    kind = obj.get("kind", "discrete")
    if kind == "mixture":
        return GaussianMixture(
            np.asarray(obj["means"], dtype=float),
            np.asarray(obj["taus"], dtype=float),
            np.asarray(obj["weights"], dtype=float),
        )
    atoms = np.asarray(obj["atoms"], dtype=float)
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    dim = obj.get("dim")
    if dim is not None and atoms.shape[1] != dim:
        raise _UsageError(f"atoms have dimension {atoms.shape[1]}, config says {dim}")
    return DiscreteMeasure(atoms, np.asarray(obj["weights"], dtype=float))


def _load_measure_file(path: str) -> DiscreteMeasure:
    with open(path) as fh:
        obj = json.load(fh)
    _validate(obj, _schema()["definitions"]["measure"])
    measure = _measure_from_config(obj)
    if not isinstance(measure, DiscreteMeasure):
        raise _UsageError("metric fixtures must be discrete measures")
    return measure


def _coefficients_from_config(obj: dict) -> CoefficientSpec:
    diffusion = obj.get("diffusion", 1.0)
    if isinstance(diffusion, str):
        diffusion = ScalarField.parse(diffusion)
    elif isinstance(diffusion, dict):
        diffusion = FunctionalSpec.from_config(diffusion)
    else:
        diffusion = float(diffusion)
    drift_local = obj.get("drift_local")
    if drift_local is not None:
        drift_local = ScalarField.parse(drift_local)
    kernel_cfg = obj.get("drift_kernel")
    kernel = None
    if kernel_cfg is not None:
        if "field" in kernel_cfg:
            kernel = FieldKernel(kernel_cfg["field"])
        elif "power" in kernel_cfg:
            kernel = PowerDifferenceKernel(kernel_cfg["power"], kernel_cfg.get("coeff", -1.0))
        else:
            raise _UsageError("drift_kernel needs either 'field' or 'power'")
    return CoefficientSpec(diffusion=diffusion, drift_local=drift_local, drift_kernel=kernel)


def _triple_from_config(obj: dict) -> LyapunovTriple:
    G = obj.get("G")
    return LyapunovTriple(
        V=ScalarField.parse(obj["V"]),
        W=ScalarField.parse(obj["W"]),
        U=ScalarField.parse(obj["U"]),
        G=ScalarField.parse(G) if G is not None else None,
    )


def _out_dir(args, cfg: dict | None = None) -> Path:
    out = Path(args.out or (cfg or {}).get("output_dir") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cell(v):
    """CSV cell: floats via repr (round-trip exact), numpy scalars unwrapped."""
    if isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=",", lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def _write_report(path: Path, report: dict) -> Path:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _condition_rows(reports):
    return [(r.condition, r.worst_margin, r.passed) for r in reports]


def _condition_dicts(reports):
    return [
        {
            "condition": r.condition,
            "worst_margin": r.worst_margin,
            "constants": {k: float(v) for k, v in r.constants.items()},
            "passed": r.passed,
            "notes": r.notes,
        }
        for r in reports
    ]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_metric(args) -> int:
    with _config_phase():
        mu = _load_measure_file(args.mu)
        sigma = _load_measure_file(args.sigma)
        weight = ScalarField.parse(args.weight) if args.weight else None
        if args.kind == "wW" and weight is None:
            raise _UsageError("--kind wW requires --weight")
    if args.kind == "W1":
        result = kantorovich_wp(mu, sigma, p=1.0)
        p = 1.0
    elif args.kind == "Wp":
        result = kantorovich_wp(mu, sigma, p=args.p)
        p = args.p
    elif args.kind == "Tp":
        result = fortet_mourier_Tp(mu, sigma, p=args.p)
        p = args.p
    elif args.kind == "tp":
        result = fortet_mourier_tp(mu, sigma, p=args.p)
        p = args.p
    else:
        result = weighted_dual_ww(mu, sigma, weight)
        p = ""
    out = _out_dir(args)
    _write_csv(out / "metric.csv", ["kind", "p", "value"], [(args.kind, p, result.value)])
    print(f"{args.kind} = {result.value!r}")
    return 0


def _cmd_osgood(args) -> int:
    with _config_phase():
        cfg = _load_config(args.config)
        a = FunctionalSpec.from_config(cfg["functional"])
        nu = _measure_from_config(cfg.get("initial", {"atoms": [0.0], "weights": [1.0]}))
    curve = sample_f_curve(a, nu)
    report = osgood_test(curve, epsilon=cfg.get("epsilon"))
    out = _out_dir(args, cfg)
    _write_csv(out / "f_curve.csv", ["beta", "f"], curve)
    _write_report(
        out / "osgood_report.json",
        {
            "classification": report.classification,
            "fitted_exponent": report.fitted_exponent,
            "integral_estimates": list(report.integral_estimates),
            "extrapolated_integral": report.extrapolated_integral,
            "epsilon": report.epsilon,
            "pass": True,
        },
    )
    if not args.no_plots:
        from . import figures

        figures.plot_f_curve(curve, report, out / "f_curve.png")
    print(f"classification: {report.classification} (exponent {report.fitted_exponent:.4f})")
    return 0


def _build_pair(cfg):
    a = FunctionalSpec.from_config(cfg["functional"])
    nu = _measure_from_config(cfg.get("initial", {"atoms": [0.0], "weights": [1.0]}))
    grid = cfg.get("grid", {})
    return construct_branches(a, nu, grid.get("t_max", 1.0), steps=grid.get("steps", 200))


def _separation_curve(pair, metric_cfg: dict | None):
    """Separation of the two branches, W1 by default or per the metric config."""
    if not metric_cfg or metric_cfg["kind"] == "W1":
        return branch_separation(pair), "W1"
    from .particles import compare_flows

    kind = metric_cfg["kind"]
    weight = metric_cfg.get("weight")
    curve = compare_flows(
        pair.stationary,
        pair.moving,
        metric=kind,
        p=metric_cfg.get("p", 2.0),
        weight=ScalarField.parse(weight) if weight else None,
    )
    return curve, kind


def _cmd_branches(args) -> int:
    with _config_phase():
        cfg = _load_config(args.config)
        if cfg.get("metric", {}).get("kind") == "wW" and not cfg["metric"].get("weight"):
            raise _UsageError("metric kind 'wW' needs a weight expression")
    pair = _build_pair(cfg)
    separation, metric_name = _separation_curve(pair, cfg.get("metric"))
    out = _out_dir(args, cfg)
    _write_csv(out / "separation.csv", ["t", metric_name], separation)
    _write_csv(
        out / "time_change.csv",
        ["t", "tau"],
        zip(pair.time_change.times, pair.time_change.taus),
    )
    max_sep = float(separation[:, 1].max())
    passed = max_sep > 1e-4
    _write_report(
        out / "branches_report.json",
        {
            "classification": pair.osgood.classification,
            "fitted_exponent": pair.osgood.fitted_exponent,
            "tau_final": float(pair.time_change.taus[-1]),
            "max_separation": max_sep,
            "pass": passed,
        },
    )
    if not args.no_plots:
        from . import figures

        figures.plot_branches(separation, pair.time_change, out / "branches.png")
    print(f"branches separate up to W1 = {max_sep:.6g}")
    return 0 if passed else 2


def _cmd_verify(args) -> int:
    with _config_phase():
        cfg = _load_config(args.config)
        tolerance = cfg.get("tolerance", 1e-6)
    pair = _build_pair(cfg)
    tests = default_test_battery()
    t_end = float(pair.moving.times[-1])
    res_moving = weak_form_residual(pair.moving, pair.functional, None, tests, t_end)
    res_stationary = weak_form_residual(pair.stationary, pair.functional, None, tests, t_end)
    worst = float(max(res_moving.max(), res_stationary.max()))
    passed = worst <= tolerance
    out = _out_dir(args, cfg)
    _write_csv(
        out / "weak_form_residuals.csv",
        ["test_index", "stationary", "moving"],
        [(i, s, m) for i, (s, m) in enumerate(zip(res_stationary, res_moving))],
    )
    _write_report(
        out / "verify_report.json",
        {
            "worst_residual": worst,
            "tolerance": tolerance,
            "n_tests": len(tests),
            "pass": passed,
        },
    )
    print(f"worst weak-form residual {worst:.3e} (tolerance {tolerance:g})")
    return 0 if passed else 2


def _cmd_conditions(args) -> int:
    with _config_phase():
        cfg = _load_config(args.config)
        coeffs = _coefficients_from_config(cfg.get("coefficients", {}))
        triple = _triple_from_config(cfg["lyapunov"])
        mu = _measure_from_config(cfg.get("measure", {"atoms": [0.0], "weights": [1.0]}))
        pack = cfg.get("pack", "H")
        grid = cfg.get("grid", {})
        kwargs = {}
        if "box" in grid:
            kwargs["box"] = tuple(grid["box"])
        if "t_range" in grid:
            kwargs["t_range"] = tuple(grid["t_range"])
        if "grid_n" in grid:
            kwargs["grid_n"] = grid["grid_n"]
        if "inner_fraction" in grid:
            kwargs["inner_fraction"] = grid["inner_fraction"]
        if pack == "DH" and "delta" in grid:
            kwargs["delta"] = grid["delta"]
    checker = check_H if pack == "H" else check_DH
    reports = checker(coeffs, triple, mu, **kwargs)
    passed = all(r.passed for r in reports)
    out = _out_dir(args, cfg)
    _write_csv(out / "conditions.csv", ["condition", "worst_margin", "passed"], _condition_rows(reports))
    _write_report(out / "conditions_report.json", {"pack": pack, "conditions": _condition_dicts(reports), "pass": passed})
    if not args.no_plots:
        from . import figures

        figures.plot_condition_grid(reports, out / "conditions.png")
    for r in reports:
        print(f"{r.condition}: {'pass' if r.passed else 'FAIL'} (margin {r.worst_margin:.3e})")
    return 0 if passed else 2


def _cmd_adjoint(args) -> int:
    with _config_phase():
        make = {"heat": heat_battery, "ou": ou_battery}[args.battery]
        problem = make(args.n, args.n)
    sol = solve_backward(problem)
    overshoot = max_principle_overshoot(problem, sol)
    grad = verify_gradient_bound(problem, sol, ScalarField.const(1.0), C0=0.0)
    ratio = richardson_ratio(problem)
    passed = grad.passed and overshoot <= 1e-9 and 3.5 <= ratio <= 4.5
    out = _out_dir(args)
    # matrix layout: first row is the x grid, first column the t grid
    _write_csv(
        out / "solution.csv",
        [""] + [repr(float(x)) for x in sol.x],
        [(t, *row) for t, row in zip(sol.t, sol.f)],
    )
    _write_report(
        out / "adjoint_report.json",
        {
            "battery": args.battery,
            "max_principle_overshoot": overshoot,
            "gradient_margin": grad.margin,
            "grid_h": grad.grid_h,
            "richardson_ratio": ratio,
            "pass": passed,
        },
    )
    if not args.no_plots:
        from . import figures

        figures.plot_adjoint(sol, grad, out / "adjoint.png")
    print(
        f"max-principle overshoot {overshoot:.2e}, gradient margin {grad.margin:.4f}, "
        f"refinement ratio {ratio:.2f}"
    )
    return 0 if passed else 2


def _snapshot_rows(flow, mode: str, n_particles: int):
    """Snapshot table: per-atom long form or fixed-bin histogram counts.

    Histogram counts are particle counts, so coincident particles merged
    into one atom still count with their full multiplicity.
    """
    if mode == "particles":
        header = ["t", "x", "weight"]
        rows = [
            (t, x, w)
            for t, m in zip(flow.times, flow.states)
            for x, w in zip(m.positions(), m.weights)
        ]
        return header, rows
    all_pos = np.concatenate([m.positions() for m in flow.states])
    lo, hi = float(all_pos.min()), float(all_pos.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, 65)
    centers = 0.5 * (edges[:-1] + edges[1:])
    header = ["t"] + [repr(float(c)) for c in centers]
    rows = [
        (t, *np.rint(np.histogram(m.positions(), bins=edges, weights=m.weights)[0] * n_particles).astype(int))
        for t, m in zip(flow.times, flow.states)
    ]
    return header, rows


def _cmd_simulate(args) -> int:
    with _config_phase():
        cfg = _load_config(args.config)
        sim = cfg["sim"]
        config = SimConfig(
            coefficients=_coefficients_from_config(cfg.get("coefficients", {})),
            initial=_measure_from_config(cfg["initial"]),
            n_particles=sim["n_particles"],
            dt=sim["dt"],
            t_final=sim["t_final"],
            seed=sim["seed"],
            save_every=sim.get("save_every", 1),
        )
    flow = simulate(config)
    final = flow.states[-1]
    xs = final.positions()
    moments = [
        (t, float(np.dot(np.abs(m.positions()), m.weights)), float(np.dot(m.positions() ** 2, m.weights)))
        for t, m in zip(flow.times, flow.states)
    ]
    out = _out_dir(args, cfg)
    _write_csv(out / "final_state.csv", ["x", "weight"], zip(xs, final.weights))
    _write_csv(out / "moments.csv", ["t", "abs_moment", "second_moment"], moments)
    snap_header, snap_rows = _snapshot_rows(flow, args.save_mode, config.n_particles)
    _write_csv(out / "snapshots.csv", snap_header, snap_rows)
    _write_report(
        out / "simulate_report.json",
        {
            "n_particles": config.n_particles,
            "seed": config.seed,
            "t_final": config.t_final,
            "n_saved": len(flow),
            "final_abs_moment": float(np.dot(np.abs(xs), final.weights)),
            "final_second_moment": float(np.dot(xs**2, final.weights)),
            "pass": True,
        },
    )
    if not args.no_plots:
        from . import figures

        figures.plot_histogram_flow(flow, out / "histogram.png")
    print(f"simulated {config.n_particles} particles to t = {config.t_final:g}; saved {len(flow)} states")
    return 0


# ---------------------------------------------------------------------------
# canned studies


def _study_alpha(args, out: Path) -> tuple[dict, int]:
    a = FunctionalSpec.abs_moment_power(args.alpha)
    nu = DiscreteMeasure.dirac(0.0)
    curve = sample_f_curve(a, nu)
    report = osgood_test(curve)
    result = {
        "alpha": args.alpha,
        "classification": report.classification,
        "fitted_exponent": report.fitted_exponent,
    }
    _write_csv(out / "f_curve.csv", ["beta", "f"], curve)
    if not args.no_plots:
        from . import figures

        figures.plot_f_curve(curve, report, out / "f_curve.png")
    if report.convergent:
        pair = construct_branches(a, nu, t_max=1.0)
        separation = branch_separation(pair)
        _write_csv(out / "separation.csv", ["t", "w1"], separation)
        expected = 2.0 * np.sqrt(pair.time_change.taus[-1] / np.pi)
        w1_final = float(separation[-1, 1])
        result.update(
            {
                "tau_final": float(pair.time_change.taus[-1]),
                "w1_final": w1_final,
                "w1_expected": float(expected),
            }
        )
        passed = abs(w1_final - expected) <= 1e-3
        if not args.no_plots:
            from . import figures

            figures.plot_branches(separation, pair.time_change, out / "branches.png")
    else:
        passed = report.classification == "divergent"
    return result, 0 if passed else 2


def _study_smooth_kernel(args, out: Path) -> tuple[dict, int]:
    a = FunctionalSpec.kernel_integral("x^2 / (1 + x^2)")
    curve = sample_f_curve(a, DiscreteMeasure.dirac(0.0))
    report = osgood_test(curve)
    _write_csv(out / "f_curve.csv", ["beta", "f"], curve)
    if not args.no_plots:
        from . import figures

        figures.plot_f_curve(curve, report, out / "f_curve.png")
    result = {
        "classification": report.classification,
        "fitted_exponent": report.fitted_exponent,
    }
    return result, 0 if report.classification == "divergent" else 2


def _study_drift_added(args, out: Path) -> tuple[dict, int]:
    """Distance-to-branch drift coefficient: vanishing and Lipschitz checks.

    The added drift scales the distance from the measure argument to the
    nearest state of either constructed branch, so both branches remain
    solutions and the coefficient is 1-Lipschitz in W1 per unit strength.
    The study verifies those two facts on samples; the persistence of the
    full branch pair under the enlarged equation is taken as given.
    """
    from .measures import discretize

    if args.lam == 0:
        raise _UsageError("--lam must be nonzero")
    a = FunctionalSpec.abs_moment_power(0.5)
    nu = DiscreteMeasure.dirac(0.0)
    pair = construct_branches(a, nu, t_max=1.0, steps=200)

    def as_discrete(state, n):
        return state if isinstance(state, DiscreteMeasure) else discretize(state, n)

    idx = sorted(set(np.linspace(0, pair.moving.times.size - 1, 13).round().astype(int)))
    anchor_times = pair.moving.times[idx]
    anchors = [as_discrete(pair.moving.states[k], 400) for k in idx]
    anchors.append(as_discrete(pair.stationary.states[0], 400))

    def branch_distance(measure):
        return min(kantorovich_wp(measure, s, p=1.0, method="monotone").value for s in anchors)

    vanish_rows = []
    for t, k in zip(anchor_times, idx):
        d_moving = branch_distance(as_discrete(pair.moving.states[k], 700))
        d_stationary = branch_distance(as_discrete(pair.stationary.states[k], 700))
        vanish_rows.append((t, d_stationary, d_moving))
    worst_vanish = max(max(r[1], r[2]) for r in vanish_rows)

    rng = np.random.default_rng(7)
    worst_lipschitz_gap = -np.inf
    lipschitz_rows = []
    for _ in range(20):
        ms = []
        for _ in range(2):
            pos = rng.uniform(-3.0, 3.0, 5)
            w = rng.random(5)
            ms.append(DiscreteMeasure.from_points(pos, w / w.sum()))
        w1 = kantorovich_wp(ms[0], ms[1], p=1.0, method="monotone").value
        gap = abs(branch_distance(ms[0]) - branch_distance(ms[1])) - w1
        worst_lipschitz_gap = max(worst_lipschitz_gap, gap)
        lipschitz_rows.append((w1, gap))

    _write_csv(out / "branch_distance.csv", ["t", "stationary", "moving"], vanish_rows)
    _write_csv(out / "lipschitz_samples.csv", ["w1", "gap"], lipschitz_rows)
    if not args.no_plots:
        from . import figures

        table = np.array([(t, s, m) for t, s, m in vanish_rows])
        figures.plot_table(
            table, ["stationary", "moving"], out / "branch_distance.png", title="added drift along the branches"
        )
    result = {
        "lam": args.lam,
        "n_anchors": len(anchors),
        "worst_vanish": float(worst_vanish),
        "worst_lipschitz_gap": float(worst_lipschitz_gap),
    }
    passed = worst_vanish <= 2e-2 and worst_lipschitz_gap <= 1e-9
    return result, 0 if passed else 2


def _study_drift_unique(args, out: Path) -> tuple[dict, int]:
    analysis = drift_example_analysis(args.lam)
    result = {
        "lam": analysis.lam,
        "g0": analysis.g0,
        "F_slope_max": analysis.F_slope_max,
    }
    gs = np.linspace(0.05, 0.95, 181)
    table = np.column_stack([gs, np.full_like(gs, analysis.F_slope_max)])
    _write_csv(out / "slope_profile.csv", ["g", "F_slope_max"], [(repr(g), repr(v)) for g, v in table])
    if not args.no_plots:
        from . import figures

        figures.plot_table(table, ["max slope"], out / "slope_profile.png", xlabel="g", title="fixed-point slope bound")
    return result, 0 if analysis.F_slope_max <= -1.0 + 1e-6 else 2


def _study_dirac(args, out: Path) -> tuple[dict, int]:
    b = FunctionalSpec.custom("absmom(2/3)")
    ts = np.linspace(0.0, 1.0, 401)
    paths = {
        "cubic": ts**3 / 27.0,
        "zero": np.zeros_like(ts),
        "linear_decoy": ts.copy(),
    }
    residuals = {name: dirac_flow_residual(xs, b, ts) for name, xs in paths.items()}
    table = np.column_stack([ts] + [paths[k] for k in paths])
    _write_csv(out / "dirac_paths.csv", ["t", *paths.keys()], table)
    if not args.no_plots:
        from . import figures

        figures.plot_table(table, list(paths.keys()), out / "dirac_paths.png", title="candidate point-mass paths")
    passed = residuals["cubic"] <= 1e-6 and residuals["zero"] <= 1e-12 and residuals["linear_decoy"] >= 0.5
    result = {"residuals": residuals}
    return result, 0 if passed else 2


_THM1_TRIPLE = {"V": "1 + x^8", "W": "1 + x^2", "U": "1 + x^2", "G": "x"}
_THM2_TRIPLE = {"V": "1 + x^2", "W": "exp(abs(x))", "U": "1 + x^2", "G": "x"}


def _study_thm1(args, out: Path) -> tuple[dict, int]:
    mu = DiscreteMeasure.dirac(0.0)
    triple = _triple_from_config(_THM1_TRIPLE)
    family = check_H(CoefficientSpec.interaction_example(n=1), triple, mu)
    violation = check_H(CoefficientSpec.interaction_example(n=2, coeff=1.0), triple, mu)
    family_ok = all(r.passed for r in family)
    violation_caught = any(not r.passed for r in violation)
    _write_csv(out / "family_conditions.csv", ["condition", "worst_margin", "passed"], _condition_rows(family))
    _write_csv(out / "violation_conditions.csv", ["condition", "worst_margin", "passed"], _condition_rows(violation))
    if not args.no_plots:
        from . import figures

        figures.plot_condition_grid(family, out / "family_conditions.png")
        figures.plot_condition_grid(violation, out / "violation_conditions.png")
    result = {
        "family": _condition_dicts(family),
        "violation": _condition_dicts(violation),
        "family_ok": family_ok,
        "violation_caught": violation_caught,
    }
    return result, 0 if (family_ok and violation_caught) else 2


def _study_thm2(args, out: Path) -> tuple[dict, int]:
    mu = DiscreteMeasure.dirac(0.0)
    triple = _triple_from_config(_THM2_TRIPLE)
    family = check_DH(CoefficientSpec.exp_kernel_drift(), triple, mu)
    repulsive = CoefficientSpec(diffusion=1.0, drift_kernel=FieldKernel("x * exp(y^2 / 3)"))
    violation = check_DH(repulsive, triple, mu)
    family_ok = all(r.passed for r in family)
    violation_caught = any(not r.passed for r in violation)
    _write_csv(out / "family_conditions.csv", ["condition", "worst_margin", "passed"], _condition_rows(family))
    _write_csv(out / "violation_conditions.csv", ["condition", "worst_margin", "passed"], _condition_rows(violation))
    if not args.no_plots:
        from . import figures

        figures.plot_condition_grid(family, out / "family_conditions.png")
        figures.plot_condition_grid(violation, out / "violation_conditions.png")
    result = {
        "family": _condition_dicts(family),
        "violation": _condition_dicts(violation),
        "family_ok": family_ok,
        "violation_caught": violation_caught,
    }
    return result, 0 if (family_ok and violation_caught) else 2


_STUDIES = {
    "ex-6-alpha": _study_alpha,
    "ex-6-smooth-kernel": _study_smooth_kernel,
    "ex-6-drift-added": _study_drift_added,
    "ex-6-drift-unique": _study_drift_unique,
    "ex-4-dirac": _study_dirac,
    "ex-thm1": _study_thm1,
    "ex-thm2": _study_thm2,
}


def _cmd_reproduce(args) -> int:
    out = _out_dir(args)
    result, code = _STUDIES[args.study](args, out)
    result["study"] = args.study
    result["pass"] = code == 0
    _write_report(out / "report.json", result)
    print(f"{args.study}: {'pass' if code == 0 else 'FAIL'}")
    return code


# ---------------------------------------------------------------------------
# parser


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output directory (default: config output_dir, else current directory)")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpklab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metric", help="exact metric between two discrete measures")
    p.add_argument("mu", help="JSON fixture of the first measure")
    p.add_argument("sigma", help="JSON fixture of the second measure")
    p.add_argument("--kind", choices=["W1", "Wp", "Tp", "tp", "wW"], default="W1")
    p.add_argument("--p", type=float, default=2.0, help="order for Wp/Tp/tp")
    p.add_argument("--weight", default=None, help="weight expression for --kind wW")
    p.add_argument("--out", default=None, help="output directory (default: current directory)")
    p.set_defaults(func=_cmd_metric)

    p = sub.add_parser("osgood", help="classify the source curve of a diffusion functional")
    p.add_argument("--config", required=True)
    _add_out(p)
    p.set_defaults(func=_cmd_osgood)

    p = sub.add_parser("branches", help="construct the stationary and moving branches")
    p.add_argument("--config", required=True)
    _add_out(p)
    p.set_defaults(func=_cmd_branches)

    p = sub.add_parser("verify", help="weak-form residuals of the constructed branches")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("conditions", help="check a Lyapunov or dissipativity pack on a box")
    p.add_argument("--config", required=True)
    _add_out(p)
    p.set_defaults(func=_cmd_conditions)

    p = sub.add_parser("adjoint", help="solve a backward battery and verify its bounds")
    p.add_argument("--battery", choices=["heat", "ou"], default="heat")
    p.add_argument("--n", type=int, default=400, help="grid cells in each direction")
    _add_out(p)
    p.set_defaults(func=_cmd_adjoint)

    p = sub.add_parser("simulate", help="run the interacting-particle system")
    p.add_argument("--config", required=True)
    p.add_argument(
        "--save-mode",
        choices=["particles", "hist"],
        default="hist",
        help="snapshot record: per-atom long form or 64-bin histogram counts",
    )
    _add_out(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reproduce", help="run a canned study end to end")
    p.add_argument("study", choices=sorted(_STUDIES))
    p.add_argument("--alpha", type=float, default=0.5, help="exponent for ex-6-alpha")
    p.add_argument("--lam", type=float, default=1.0, help="drift strength for the drift studies")
    _add_out(p)
    p.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return int(args.func(args))
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FpkError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
