"""Inertial multi-objective gradient dynamics.

Library and CLI for steepest common-descent fields over the convex hull of
objective gradients, heavy-ball and first-order integrators, per-objective
Lyapunov-energy diagnostics, and benchmark problems with known Pareto sets.
"""

from imog.diagnostics import (
    HpReport,
    TrajectoryReport,
    analyze,
    distance_to_pareto,
    energy,
    hp_report,
    upper_bound_envelope,
)
from imog.dynamics import (
    DivergenceError,
    DynParams,
    DynState,
    StopRule,
    Trajectory,
    default_initial_velocity,
    hbf_step,
    imog_step,
    integrate,
    mog_step,
    step_halving_error,
)
from imog.expressions import (
    EvaluationDomainError,
    ExpressionObjective,
    ExpressionSyntaxError,
    finite_diff_gradient,
    parse_expression,
)
from imog.minnorm import (
    MinNormResult,
    SimplexWeights,
    brute_force_min_norm,
    min_norm_point,
    min_norm_point_pair,
)
from imog.objectives import (
    SteepestResult,
    UnknownProblemError,
    VectorObjective,
    analytic_steepest,
    builtin_problem,
    dominates,
    is_pareto_critical,
    pareto_filter,
    steepest_characterization_gap,
    steepest_descent,
    strictly_dominates_weak,
)
from imog.trajio import (
    ConfigError,
    RunConfig,
    SweepConfig,
    emit_plot_script,
    read_run_config,
    read_sweep_config,
    read_trajectory_csv,
    write_sweep_summary,
    write_trajectory_csv,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "DynParams",
    "DynState",
    "EvaluationDomainError",
    "ExpressionObjective",
    "ExpressionSyntaxError",
    "HpReport",
    "MinNormResult",
    "RunConfig",
    "SimplexWeights",
    "SteepestResult",
    "StopRule",
    "SweepConfig",
    "Trajectory",
    "TrajectoryReport",
    "UnknownProblemError",
    "VectorObjective",
    "analytic_steepest",
    "analyze",
    "brute_force_min_norm",
    "builtin_problem",
    "default_initial_velocity",
    "distance_to_pareto",
    "dominates",
    "emit_plot_script",
    "energy",
    "finite_diff_gradient",
    "hbf_step",
    "hp_report",
    "imog_step",
    "integrate",
    "is_pareto_critical",
    "min_norm_point",
    "min_norm_point_pair",
    "mog_step",
    "pareto_filter",
    "parse_expression",
    "read_run_config",
    "read_sweep_config",
    "read_trajectory_csv",
    "steepest_characterization_gap",
    "steepest_descent",
    "step_halving_error",
    "strictly_dominates_weak",
    "upper_bound_envelope",
    "write_sweep_summary",
    "write_trajectory_csv",
]

__version__ = "0.1.0"
