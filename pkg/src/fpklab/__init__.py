"""Numerical laboratory for nonlinear parabolic equations on measures.

The package splits into a metric layer (exact transport-type distances
between discrete measures), a nonuniqueness layer (Osgood classification
of diffusion functionals and explicit pairs of distinct solutions from
one initial measure), a conditions layer (Lyapunov and dissipativity
packs that certify uniqueness regimes), an adjoint layer (a localized
backward solver with verified gradient bounds), and an interacting
particle simulator.  The ``fpklab`` command line drives canned studies
over these layers and writes CSV records with optional figures.
"""

from .conditions import (
    CoefficientSpec,
    ConditionReport,
    FieldKernel,
    LyapunovTriple,
    PowerDifferenceKernel,
    check_DH,
    check_H,
    gronwall_bound,
)
from .errors import (
    BlowUp,
    DimensionError,
    DivergentIntegral,
    DomainError,
    FpkError,
    GridMismatch,
    GridTooCoarse,
    InsufficientData,
    InvalidWeight,
    NonIntegrable,
    RootNotBracketed,
    SizeLimit,
    SolverFailure,
    UnstableScheme,
)
from .expressions import ScalarField, bump, bump_battery
from .heat import FunctionalSpec, eval_functional, heat_convolve, heat_kernel, sample_f_curve
from .measures import (
    DiscreteMeasure,
    GaussianMixture,
    MeasureFlow,
    abs_moment,
    discretize,
    integrate,
    signed_difference,
    weighted_tv,
)
from .metrics import (
    MetricReport,
    TransportPlan,
    enumerate_polytope_vertices,
    fortet_mourier_Tp,
    fortet_mourier_tp,
    kantorovich_wp,
    solve_transport_lp,
    weighted_dual_ww,
)
from .nonuniqueness import (
    BranchPair,
    OsgoodReport,
    TimeChange,
    branch_separation,
    build_time_change,
    construct_branches,
    dirac_flow_residual,
    drift_example_analysis,
    osgood_test,
    weak_form_residual,
)
from .particles import SimConfig, compare_flows, simulate

__version__ = "0.1.0"

__all__ = [
    "BlowUp",
    "BranchPair",
    "CoefficientSpec",
    "ConditionReport",
    "DimensionError",
    "DiscreteMeasure",
    "DivergentIntegral",
    "DomainError",
    "FieldKernel",
    "FpkError",
    "FunctionalSpec",
    "GaussianMixture",
    "GridMismatch",
    "GridTooCoarse",
    "InsufficientData",
    "InvalidWeight",
    "LyapunovTriple",
    "MeasureFlow",
    "MetricReport",
    "NonIntegrable",
    "OsgoodReport",
    "PowerDifferenceKernel",
    "RootNotBracketed",
    "ScalarField",
    "SimConfig",
    "SizeLimit",
    "SolverFailure",
    "TimeChange",
    "TransportPlan",
    "UnstableScheme",
    "abs_moment",
    "branch_separation",
    "build_time_change",
    "bump",
    "bump_battery",
    "check_DH",
    "check_H",
    "compare_flows",
    "construct_branches",
    "dirac_flow_residual",
    "discretize",
    "drift_example_analysis",
    "enumerate_polytope_vertices",
    "eval_functional",
    "fortet_mourier_Tp",
    "fortet_mourier_tp",
    "gronwall_bound",
    "heat_convolve",
    "heat_kernel",
    "integrate",
    "kantorovich_wp",
    "osgood_test",
    "sample_f_curve",
    "signed_difference",
    "simulate",
    "solve_transport_lp",
    "weak_form_residual",
    "weighted_dual_ww",
    "weighted_tv",
]
