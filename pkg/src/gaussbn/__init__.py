"""Polytree Bayesian networks with uncertain parameters.

Exact pi/lambda propagation at parameter means, noisy-MAX gates evaluated in
time linear in the number of parents, and sequential moment-matching updates
of each parameter's mean and variance.
"""

from .learning import (
    CaseReport,
    LinearWeight,
    UpdateDelta,
    apply_case,
    binary_or_delta,
    general_cpt_delta,
    learn_stream,
    linear_gaussian_moments,
    noisy_max_delta,
)
from .model import (
    CaseError,
    CaseRecord,
    GaussianParam,
    InvalidNetworkError,
    LinkParams,
    Network,
    NoisyMaxCpd,
    ParamId,
    SizeLimitError,
    TabularCpd,
    ValidationReport,
    Variable,
    expand_noisy_max,
    iter_params,
    mean_cpt,
    prior_cpd,
    validate_network,
    with_params,
)
from .propagation import (
    MessageSet,
    QProfile,
    ZeroProbabilityError,
    noisy_max_lambda,
    noisy_max_pi,
    posterior_marginal,
    propagate,
)

__all__ = [
    "CaseError",
    "CaseRecord",
    "CaseReport",
    "GaussianParam",
    "InvalidNetworkError",
    "LinearWeight",
    "LinkParams",
    "MessageSet",
    "Network",
    "NoisyMaxCpd",
    "ParamId",
    "QProfile",
    "SizeLimitError",
    "TabularCpd",
    "UpdateDelta",
    "ValidationReport",
    "Variable",
    "ZeroProbabilityError",
    "apply_case",
    "binary_or_delta",
    "expand_noisy_max",
    "general_cpt_delta",
    "iter_params",
    "learn_stream",
    "linear_gaussian_moments",
    "mean_cpt",
    "noisy_max_delta",
    "noisy_max_lambda",
    "noisy_max_pi",
    "posterior_marginal",
    "prior_cpd",
    "propagate",
    "validate_network",
    "with_params",
]
