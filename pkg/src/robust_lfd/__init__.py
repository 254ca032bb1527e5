"""Least favorable densities for minimax robust binary hypothesis testing.

Solvers for total-variation neighborhoods, one-sided contamination
models, two-sided density bands, and general linearly constrained classes
(moments, probabilities on sets), plus verification tooling: stochastic
ordering, error exponents, Monte Carlo error probabilities, and
f-divergence minimality checks.
"""
from __future__ import annotations

from .band_general import (
    BandSolution,
    BandSpec,
    Region,
    band_overlap_diagnostic,
    classify_regions,
    solve_band,
)
from .band_solver import (
    ContaminationSolution,
    ContaminationSpec,
    smr_ordering_witness,
    solve_contamination,
    solve_lower_contamination,
    solve_upper_contamination,
)
from .convex_solver import (
    ConvexLFDResult,
    LinearConstraint,
    convex_grid,
    evaluate_constraint,
    kkt_certificate,
    maximize_affinity_at_u,
    minimize_over_u,
    moment_constraint,
    pointwise_bound_constraints,
    ppoint_constraint,
    u_dependence_metric,
)
from .divergence import (
    F_DIVERGENCE_KINDS,
    f_divergence,
    likelihood_ratio,
    tv_distance,
    u_affinity,
)
from .errors import (
    ClassOverlapError,
    ConfigError,
    ConvergenceError,
    DegenerateDensityError,
    DimensionMismatchError,
    DomainError,
    InfeasibleClassError,
    ParameterError,
    RateUnboundedWarning,
)
from .grid import (
    Grid,
    GridDensity,
    default_grid,
    gaussian_density,
    normalize,
    sample_from,
    trapezoid_integral,
)
from .presets import (
    PRESET_NAMES,
    preset_catalogue,
    preset_config,
    run_config,
    validate_config,
)
from .samplers import band_members, contamination_h, contamination_members, tv_members
from .tv_solver import TVSolution, TVSpec, eval_clipped_lrf, solve_tv, tv_residuals
from .verify import (
    MonteCarloResult,
    TestConfig,
    VerifyReport,
    cramer_rate,
    fdiv_minimality_check,
    monte_carlo_test,
    ordering_margin,
    run_verification,
    tabulated_lrf,
    threshold_separation,
)

__version__ = "0.1.0"

__all__ = [
    "BandSolution",
    "BandSpec",
    "Region",
    "band_overlap_diagnostic",
    "classify_regions",
    "solve_band",
    "ContaminationSolution",
    "ContaminationSpec",
    "smr_ordering_witness",
    "solve_contamination",
    "solve_lower_contamination",
    "solve_upper_contamination",
    "ConvexLFDResult",
    "LinearConstraint",
    "convex_grid",
    "evaluate_constraint",
    "kkt_certificate",
    "maximize_affinity_at_u",
    "minimize_over_u",
    "moment_constraint",
    "pointwise_bound_constraints",
    "ppoint_constraint",
    "u_dependence_metric",
    "F_DIVERGENCE_KINDS",
    "f_divergence",
    "likelihood_ratio",
    "tv_distance",
    "u_affinity",
    "ClassOverlapError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateDensityError",
    "DimensionMismatchError",
    "DomainError",
    "InfeasibleClassError",
    "ParameterError",
    "RateUnboundedWarning",
    "Grid",
    "GridDensity",
    "default_grid",
    "gaussian_density",
    "normalize",
    "sample_from",
    "trapezoid_integral",
    "PRESET_NAMES",
    "preset_catalogue",
    "preset_config",
    "run_config",
    "validate_config",
    "band_members",
    "contamination_h",
    "contamination_members",
    "tv_members",
    "TVSolution",
    "TVSpec",
    "eval_clipped_lrf",
    "solve_tv",
    "tv_residuals",
    "MonteCarloResult",
    "TestConfig",
    "VerifyReport",
    "cramer_rate",
    "fdiv_minimality_check",
    "monte_carlo_test",
    "ordering_margin",
    "run_verification",
    "tabulated_lrf",
    "threshold_separation",
    "__version__",
]
