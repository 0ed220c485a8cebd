"""Estimate Gaussian parameters and the truncation set from samples of a
Gaussian truncated to an unknown set."""
from .errors import (
    DimensionMismatchError,
    FactorizationError,
    InsufficientDataError,
    InvalidInputError,
    LowMassError,
    NumericalError,
    NumericalOverflowError,
    SizeError,
    TruncGaussError,
    ValidationError,
)
from .gaussian import (
    AffineMap,
    GaussianParams,
    IsotropicCert,
    MCEstimate,
    TruncatedGaussian,
    conditional_moments,
    gaussian_mass,
    isotropic_check,
    log_density,
    mass_estimate,
    sample,
    truncated_sample,
    tv_monte_carlo,
    tv_parameter_bound,
    whitening_transform,
)
from .hermite import HermiteExpansion, enumerate_multi_indices, hermite_1d, hermite_multi, noise_operator_apply
from .identifiability import (
    Hypothesis,
    MomentVector,
    empirical_moments,
    erm_min_mass_box,
    grid_hypotheses,
    moment_distance,
    tournament,
)
from .optimizer import (
    ProjectionSet,
    ReparamPoint,
    SgdConfig,
    gradient_sample,
    h_value,
    hessian_probe,
    median_of_runs,
    objective_estimate,
    project_to_D,
    sgd_run,
)
from .psi import PsiTarget, coefficient_variance_probe, estimate_coefficients, eval_psi_k, psi_l2_error
from .recovery import RecoveredSet, classify, symdiff_mass, weighted_indicator
from .sets import (
    AxisBox,
    FullSpace,
    Halfspace,
    HalfspaceIntersection,
    LowerBoundFamily,
    PolynomialThreshold,
    SetOracle,
    build_lower_bound_set,
    noise_sensitivity,
    set_from_json,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionMismatchError",
    "FactorizationError",
    "InsufficientDataError",
    "InvalidInputError",
    "LowMassError",
    "NumericalError",
    "NumericalOverflowError",
    "SizeError",
    "TruncGaussError",
    "ValidationError",
    "AffineMap",
    "GaussianParams",
    "IsotropicCert",
    "MCEstimate",
    "TruncatedGaussian",
    "conditional_moments",
    "gaussian_mass",
    "isotropic_check",
    "log_density",
    "mass_estimate",
    "sample",
    "truncated_sample",
    "tv_monte_carlo",
    "tv_parameter_bound",
    "whitening_transform",
    "HermiteExpansion",
    "enumerate_multi_indices",
    "hermite_1d",
    "hermite_multi",
    "noise_operator_apply",
    "Hypothesis",
    "MomentVector",
    "empirical_moments",
    "erm_min_mass_box",
    "grid_hypotheses",
    "moment_distance",
    "tournament",
    "ProjectionSet",
    "ReparamPoint",
    "SgdConfig",
    "gradient_sample",
    "h_value",
    "hessian_probe",
    "median_of_runs",
    "objective_estimate",
    "project_to_D",
    "sgd_run",
    "PsiTarget",
    "coefficient_variance_probe",
    "estimate_coefficients",
    "eval_psi_k",
    "psi_l2_error",
    "RecoveredSet",
    "classify",
    "symdiff_mass",
    "weighted_indicator",
    "AxisBox",
    "FullSpace",
    "Halfspace",
    "HalfspaceIntersection",
    "LowerBoundFamily",
    "PolynomialThreshold",
    "SetOracle",
    "build_lower_bound_set",
    "noise_sensitivity",
    "set_from_json",
]
