"""Locally optimal experimental design for generalized linear models.

Closed-form constructions, information-matrix criteria of the Kiefer
family, equivalence-theorem certification, and iterative weight/support
optimizers, plus a JSON-driven command line (``design``).
"""

from .constructors import (
    ConstructResult,
    axis_design,
    binary_two_point_design,
    corner_design_multifactor,
    fourpoint_d_weights,
    hypercube_linear_design,
    interval_boundary_design,
    phik_axis_weights,
    saturated_weights,
    two_factor_design,
)
from .designs import (
    AxisSet,
    BinaryHypercube,
    Design,
    FiniteSet,
    GridBox,
    a_value,
    canonical_point,
    information_matrix,
    min_eigenvalue,
    parse_criterion_order,
    phi_k_of_matrix,
    phi_k_value,
    region_from_dict,
    region_points,
    region_to_dict,
    weighted_information,
)
from .equivalence import (
    VerificationReport,
    equivalence_bound,
    sensitivity_at,
    sensitivity_scan,
    verify_design,
    write_scan_csv,
)
from .errors import ConvergenceError, DomainError, SingularMatrixError
from .models import (
    BUILTIN_FAMILIES,
    FIRST_ORDER_INTERCEPT,
    FIRST_ORDER_NO_INTERCEPT,
    SINGLE_FACTOR_INTERCEPT,
    LinkFamily,
    ModelSpec,
    RegressionKind,
    custom_family,
    first_order_intercept,
    first_order_no_intercept,
    gamma_inverse,
    intensity,
    intensity_many,
    linear_identity,
    linear_predictor,
    logistic,
    poisson_log,
    probit,
    regression_matrix,
    regression_vector,
    single_factor_intercept,
    unit_information,
)
from .optimize import (
    DesignSearchResult,
    OptimizerOptions,
    brute_force_weights,
    optimize_design,
    optimize_weights,
)

__version__ = "0.1.0"

__all__ = [
    "AxisSet",
    "BUILTIN_FAMILIES",
    "BinaryHypercube",
    "ConstructResult",
    "ConvergenceError",
    "Design",
    "DesignSearchResult",
    "DomainError",
    "FIRST_ORDER_INTERCEPT",
    "FIRST_ORDER_NO_INTERCEPT",
    "FiniteSet",
    "GridBox",
    "LinkFamily",
    "ModelSpec",
    "OptimizerOptions",
    "RegressionKind",
    "SINGLE_FACTOR_INTERCEPT",
    "SingularMatrixError",
    "VerificationReport",
    "a_value",
    "axis_design",
    "binary_two_point_design",
    "brute_force_weights",
    "canonical_point",
    "corner_design_multifactor",
    "custom_family",
    "equivalence_bound",
    "first_order_intercept",
    "first_order_no_intercept",
    "fourpoint_d_weights",
    "gamma_inverse",
    "hypercube_linear_design",
    "information_matrix",
    "intensity",
    "intensity_many",
    "interval_boundary_design",
    "linear_identity",
    "linear_predictor",
    "logistic",
    "min_eigenvalue",
    "optimize_design",
    "optimize_weights",
    "parse_criterion_order",
    "phi_k_of_matrix",
    "phi_k_value",
    "phik_axis_weights",
    "poisson_log",
    "probit",
    "region_from_dict",
    "region_points",
    "region_to_dict",
    "regression_matrix",
    "regression_vector",
    "saturated_weights",
    "sensitivity_at",
    "sensitivity_scan",
    "single_factor_intercept",
    "two_factor_design",
    "unit_information",
    "verify_design",
    "weighted_information",
    "write_scan_csv",
]
