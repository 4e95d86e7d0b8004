"""Principal components lasso: l1 sparsity plus shrinkage toward leading PCs.

The quadratic penalty leaves each feature group's top principal-component
direction unpenalized and penalizes lower components in proportion to their
squared-singular-value gap, so solutions are sparse and biased toward the
directions the data varies most in.
"""

from .crossval import CVConfig, CVResult, auc, kfold_cv
from .dof import DfEstimate, McDfConfig, df_estimate, df_trace, monte_carlo_df
from .errors import DataError, DegenerateGroupError, NumericalError, PclassoError
from .groups import GroupLayout
from .kernels import backend_name
from .penalty import (
    GroupPenalty,
    GroupSVD,
    build_group_penalty,
    build_penalty_block,
    compute_group_svd,
    contour_2d,
    penalty_value,
    rat_to_theta,
    shrinkage_factors,
    theta_to_rat,
)
from .simgen import SimData, SimSpec, generate
from .solver import (
    Dataset,
    FitConfig,
    PathFit,
    fit_logistic_path,
    fit_path,
    kkt_report,
    lambda_max,
    soft_threshold,
    strong_rule_screen,
)

__version__ = "0.1.0"

__all__ = [
    "CVConfig",
    "CVResult",
    "Dataset",
    "DataError",
    "DegenerateGroupError",
    "DfEstimate",
    "FitConfig",
    "GroupLayout",
    "GroupPenalty",
    "GroupSVD",
    "McDfConfig",
    "NumericalError",
    "PathFit",
    "PclassoError",
    "SimData",
    "SimSpec",
    "auc",
    "backend_name",
    "build_group_penalty",
    "build_penalty_block",
    "compute_group_svd",
    "contour_2d",
    "df_estimate",
    "df_trace",
    "fit_logistic_path",
    "fit_path",
    "generate",
    "kfold_cv",
    "kkt_report",
    "lambda_max",
    "monte_carlo_df",
    "penalty_value",
    "rat_to_theta",
    "shrinkage_factors",
    "soft_threshold",
    "strong_rule_screen",
    "theta_to_rat",
    "__version__",
]
