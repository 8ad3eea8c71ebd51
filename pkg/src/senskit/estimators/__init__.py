"""Estimators for sensitivity quantiles from staircase-style data."""

from .base import QuantileEstimate
from .isotonic import IsotonicFit, cir, cir_quantile, pava, pooled_rate_bands
from .mle import (
    MleFit,
    dataset_levels,
    fieller_interval,
    fit_probit_levels,
    fit_probit_mle,
    information_matrix,
    probit_loglik,
    w_statistic,
)
from .rmj import rmj_estimate

__all__ = [
    "IsotonicFit",
    "MleFit",
    "QuantileEstimate",
    "cir",
    "cir_quantile",
    "dataset_levels",
    "fieller_interval",
    "fit_probit_levels",
    "fit_probit_mle",
    "information_matrix",
    "pava",
    "pooled_rate_bands",
    "probit_loglik",
    "rmj_estimate",
    "w_statistic",
]
