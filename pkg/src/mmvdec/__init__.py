"""Joint-sparse recovery for multiple measurement vectors.

Row-sparsity-regularized least squares over a shared dictionary decouples
into a coupled covariance-estimation phase followed by per-sample plug-in
MMSE reconstruction.  This package provides the signal model, both
covariance solvers (convex and maximum-likelihood), the decoupled
estimators, identity verification, and a Monte-Carlo NMSE benchmark
harness with CSV and figure output.
"""

from .covsolve import (
    GammaVector,
    SolveInfo,
    SolveOptions,
    SolverError,
    SolverState,
    coordinate_min_g,
    coordinate_min_l,
    eval_g,
    eval_l,
    gk_derivative,
    lk_derivative,
    solve_g,
    solve_ml,
)
from .estimate import (
    CoefficientMatrix,
    DirectOptions,
    EstimateBatch,
    coefficients_to_signals,
    group_soft_threshold,
    l21_ls_direct,
    oracle_mmse,
    plug_in_mmse,
)
from .harness import (
    ExperimentConfig,
    ResultTable,
    nmse,
    full_benchmark_config,
    run_experiment,
)
from .model import (
    CovarianceModel,
    Dictionary,
    ProjectionSet,
    SignalBatch,
    SketchSet,
    array_response,
    build_grid_dictionary,
    diffuse_covariance,
    sample_selection_projections,
    sample_signals,
    sketch,
)
from .verify import (
    DecouplingReport,
    VerifyOptions,
    check_decoupling,
    check_estimate_identity,
    check_gamma_identity,
    make_instance,
    run_suite,
)

__version__ = "0.1.0"

__all__ = [
    "GammaVector", "SolveInfo", "SolveOptions", "SolverError", "SolverState",
    "coordinate_min_g", "coordinate_min_l", "eval_g", "eval_l",
    "gk_derivative", "lk_derivative", "solve_g", "solve_ml",
    "CoefficientMatrix", "DirectOptions", "EstimateBatch",
    "coefficients_to_signals", "group_soft_threshold", "l21_ls_direct",
    "oracle_mmse", "plug_in_mmse",
    "ExperimentConfig", "ResultTable", "nmse", "full_benchmark_config",
    "run_experiment",
    "CovarianceModel", "Dictionary", "ProjectionSet", "SignalBatch",
    "SketchSet", "array_response", "build_grid_dictionary",
    "diffuse_covariance", "sample_selection_projections", "sample_signals",
    "sketch",
    "DecouplingReport", "VerifyOptions", "check_decoupling",
    "check_estimate_identity", "check_gamma_identity", "make_instance",
    "run_suite",
]
