"""Sparse column-wise inverse operator: L1-penalized precision estimation.

Each column of the precision matrix is estimated by an L1-penalized
quadratic program on the sample covariance, solved by coordinate descent,
then the columns are symmetrized by keeping the smaller-magnitude entry of
each symmetric pair. Includes path following over a penalty grid,
cross-validated per-column tuning, exhaustive small-instance verification,
simulation models, and a benchmark harness.
"""

from .covariance import (
    CovarianceEstimate,
    DataMatrix,
    load_csv,
    perturb_to_pd,
    sample_covariance,
)
from .errors import NotPositiveDefiniteError, PowerIterationError, ScioError
from .evaluation import (
    LossReport,
    SupportReport,
    bregman_loss,
    classification_score,
    loss_report,
    support_report,
)
from .matrix import (
    SymMatrix,
    as_sym,
    elementwise_max_norm,
    frobenius_norm,
    log_det_pd,
    matrix_l1_norm,
    min_eigenvalue,
    read_matrix_text,
    spectral_norm,
    write_matrix_text,
)
from .oracle import (
    SupportSet,
    brute_force_column,
    column_objective,
    diamond_covariance,
    irrepresentable_margin,
    kkt_residual,
    star_covariance,
    support_of,
    truth_support_matrix,
)
from .simgen import (
    BenchmarkConfig,
    BenchmarkResult,
    GraphModelSpec,
    ascii_heatmap,
    gen_block,
    gen_decay,
    gen_sparse,
    run_benchmark,
    sample_gaussian,
    truth_matrix,
    two_block_compose,
    write_pgm,
)
from .solver import (
    ColumnSolution,
    PrecisionEstimate,
    SolverConfig,
    assemble_and_symmetrize,
    coordinate_update,
    default_lambda_grid,
    estimate_precision,
    load_precision,
    precision_from_json,
    precision_to_json,
    save_precision,
    soft_threshold,
    solve_column,
    solve_path,
)
from .tuning import CVPlan, CVResult, cv_risk, estimate_with_cv, select_lambda, split_sample

__version__ = "0.1.0"

__all__ = [
    "BenchmarkConfig",
    "BenchmarkResult",
    "ColumnSolution",
    "CovarianceEstimate",
    "CVPlan",
    "CVResult",
    "DataMatrix",
    "GraphModelSpec",
    "LossReport",
    "NotPositiveDefiniteError",
    "PowerIterationError",
    "PrecisionEstimate",
    "ScioError",
    "SolverConfig",
    "SupportReport",
    "SupportSet",
    "SymMatrix",
    "as_sym",
    "ascii_heatmap",
    "assemble_and_symmetrize",
    "bregman_loss",
    "brute_force_column",
    "classification_score",
    "column_objective",
    "coordinate_update",
    "cv_risk",
    "default_lambda_grid",
    "diamond_covariance",
    "elementwise_max_norm",
    "estimate_precision",
    "estimate_with_cv",
    "frobenius_norm",
    "gen_block",
    "gen_decay",
    "gen_sparse",
    "irrepresentable_margin",
    "kkt_residual",
    "load_csv",
    "load_precision",
    "log_det_pd",
    "loss_report",
    "matrix_l1_norm",
    "min_eigenvalue",
    "perturb_to_pd",
    "precision_from_json",
    "precision_to_json",
    "read_matrix_text",
    "run_benchmark",
    "sample_covariance",
    "sample_gaussian",
    "save_precision",
    "select_lambda",
    "soft_threshold",
    "solve_column",
    "solve_path",
    "spectral_norm",
    "split_sample",
    "star_covariance",
    "support_of",
    "support_report",
    "truth_matrix",
    "truth_support_matrix",
    "two_block_compose",
    "write_matrix_text",
    "write_pgm",
]
