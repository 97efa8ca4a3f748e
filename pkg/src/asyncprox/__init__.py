"""Parallel asynchronous block fixed-point iteration with bounded delays.

The package solves 0 in T(x) for maximal strongly monotone operators T
by iterating the resolvent F = (I + cT)^{-1} under block-asynchronous
schedules with bounded staleness: minimization of strongly convex
quadratics, quadratic saddle points, and box-constrained variational
inequalities, with a deterministic replay simulator, a shared-memory
parallel executor, and runtime checkers for the convergence hypotheses.
"""

from .block_space import (
    BlockStructure,
    BlockVector,
    block_norms,
    euclidean_norm,
    inner_product,
    uniform_norm,
)
from .diagnostics import (
    HypothesisReport,
    TraceStats,
    analyze_trace,
    check_h3,
    check_h4,
    check_linear_h4,
    estimate_modulus,
    estimate_modulus_report,
)
from .engine import (
    IterationState,
    ParallelConfig,
    RunConfig,
    RunResult,
    assemble_read,
    run_parallel,
    run_simulated,
)
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    DomainError,
    NumericError,
    ParameterError,
    StalenessError,
)
from .operators import (
    AffineMonotone,
    BoxVI,
    C_FLOOR,
    FaceActivity,
    OperatorValue,
    Problem,
    QuadraticMin,
    Resolvent,
    SaddleQuadratic,
    apply_operator,
    auto_c,
    min_c,
    proj_ball,
    proj_box,
    solution_residual,
)
from .oracle import CheckVerdict, saddle_check, solve_direct, vi_check
from .scheduler import (
    Schedule,
    ScheduleStep,
    ValidationReport,
    gauss_seidel,
    jacobi,
    random_bounded_delay,
)
from .specio import (
    DEMO_VARIANTS,
    RunSpec,
    demo_spec_path,
    load_run_spec,
    parse_run_spec,
    run_spec_to_json_dict,
    save_run_spec,
)
from .trace import Trace, TraceRecord

__version__ = "0.1.0"

__all__ = [
    "AffineMonotone", "BlockStructure", "BlockVector", "BoxVI", "C_FLOOR",
    "CheckVerdict", "ConvergenceError", "DEMO_VARIANTS",
    "DimensionMismatchError", "DomainError", "FaceActivity",
    "HypothesisReport", "IterationState", "NumericError", "OperatorValue",
    "ParallelConfig", "ParameterError", "Problem", "QuadraticMin",
    "Resolvent", "RunConfig", "RunResult", "RunSpec", "SaddleQuadratic",
    "Schedule", "ScheduleStep", "StalenessError", "Trace", "TraceRecord",
    "TraceStats", "ValidationReport", "analyze_trace", "apply_operator",
    "assemble_read", "auto_c", "block_norms", "check_h3", "check_h4",
    "check_linear_h4", "demo_spec_path", "estimate_modulus",
    "estimate_modulus_report", "euclidean_norm", "gauss_seidel",
    "inner_product", "jacobi", "load_run_spec", "min_c", "parse_run_spec",
    "proj_ball", "proj_box", "random_bounded_delay", "run_parallel",
    "run_simulated", "run_spec_to_json_dict", "saddle_check",
    "save_run_spec", "solution_residual", "solve_direct", "uniform_norm",
    "vi_check",
]
