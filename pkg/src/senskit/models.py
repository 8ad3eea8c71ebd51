"""Binary-response sensitivity models.

A sensitivity distribution is the cdf F(x) = P(response at stimulus x).
The workhorse is the probit-on-log model

    P(y = 1 | x) = Phi(alpha + beta * log x),    x > 0,

which treats log-stimulus as the natural working scale.  For simulation
studies we also carry a family of location-scale response curves defined
directly on the working scale (normal, uniform, logistic, extreme-value,
skewed-logistic, Cauchy).

Scalar normal primitives live here too; everything downstream (designs,
estimators, the simulation harness) goes through them so that tail
behaviour is consistent across the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtri

__all__ = [
    "norm_cdf",
    "norm_pdf",
    "norm_quantile",
    "ProbitTheta",
    "ResponseModel",
    "FAMILIES",
    "probit_prob",
    "model_cdf",
    "model_quantile",
    "bisect_quantile",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# math.exp overflows past ~709.78; cdf tails are clamped before that point.
_EXP_MAX = 709.0


def norm_cdf(z: float) -> float:
    """Standard normal cdf via erfc, accurate in both tails."""
    return 0.5 * math.erfc(-z / _SQRT2)


def norm_pdf(z: float) -> float:
    if abs(z) > 38.0:  # exp underflows anyway; avoid exp(-inf**2) noise
        return 0.0
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def norm_quantile(p: float) -> float:
    """Inverse standard normal cdf (p strictly inside (0, 1))."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must be in (0, 1), got {p}")
    return float(ndtri(p))


@dataclass(frozen=True, slots=True)
class ProbitTheta:
    """Parameters (alpha, beta) of the probit-on-log response model.

    beta > 0 so that response probability increases with stimulus.
    """

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("theta must be finite")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    def log_quantile(self, p: float) -> float:
        """log-stimulus at which the response probability equals p."""
        return (norm_quantile(p) - self.alpha) / self.beta

    def quantile(self, p: float) -> float:
        """Stimulus at which the response probability equals p."""
        return math.exp(self.log_quantile(p))

    @property
    def median(self) -> float:
        return math.exp(-self.alpha / self.beta)


def probit_prob(theta: ProbitTheta, x: float) -> float:
    """Response probability Phi(alpha + beta log x) at stimulus x > 0."""
    if not x > 0.0:
        raise ValueError(f"stimulus must be positive, got {x}")
    return norm_cdf(theta.alpha + theta.beta * math.log(x))


FAMILIES = (
    "probit-log",
    "normal",
    "uniform",
    "logistic",
    "extreme-value",
    "skewed-logistic",
    "cauchy",
)


@dataclass(frozen=True, slots=True)
class ResponseModel:
    """A response curve from one of the supported families.

    For every family except ``probit-log`` the curve is a location-scale
    cdf evaluated directly on the working (design) axis:

        F(x) = F0((x - location) / scale)

    with ``uniform`` spanning [location, location + scale], extreme-value
    of the minimum type (cloglog link), and skewed-logistic
    F0(z) = (1 + exp(-z))**(-shape).

    ``probit-log`` is the physical-stimulus model: its working scale is
    log-stimulus, ``cdf`` takes a positive stimulus, and location/scale
    describe the log-stimulus axis (location = -alpha/beta,
    scale = 1/beta).
    """

    family: str
    location: float = 0.0
    scale: float = 1.0
    shape: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.family == "skewed-logistic":
            if self.shape is None or not self.shape > 0.0:
                raise ValueError("skewed-logistic requires shape > 0")
        elif self.shape is not None:
            raise ValueError(f"shape is only meaningful for skewed-logistic, not {self.family}")

    @classmethod
    def from_theta(cls, theta: ProbitTheta) -> "ResponseModel":
        return cls("probit-log", location=-theta.alpha / theta.beta, scale=1.0 / theta.beta)

    @property
    def theta(self) -> ProbitTheta:
        if self.family != "probit-log":
            raise ValueError(f"{self.family} has no probit parameters")
        return ProbitTheta(alpha=-self.location / self.scale, beta=1.0 / self.scale)

    # -- natural argument ------------------------------------------------

    def cdf(self, x: float) -> float:
        """Response probability at x (positive stimulus for probit-log,
        working-axis value otherwise)."""
        if self.family == "probit-log":
            if not x > 0.0:
                raise ValueError(f"stimulus must be positive, got {x}")
            return self.level_prob(math.log(x))
        return self.level_prob(x)

    def quantile(self, p: float) -> float:
        """Inverse cdf; for probit-log this is a stimulus in natural units."""
        if self.family == "probit-log":
            return math.exp(self.level_quantile(p))
        return self.level_quantile(p)

    # -- working scale ---------------------------------------------------

    def level_prob(self, level: float) -> float:
        """Response probability at a working-scale level (log-stimulus for
        probit-log, the model axis otherwise).  Clamped to [0, 1] without
        overflow for |level| up to several hundred."""
        z = (level - self.location) / self.scale
        family = self.family
        if family in ("probit-log", "normal"):
            return norm_cdf(z)
        if family == "uniform":
            return min(1.0, max(0.0, z))
        if family == "logistic":
            if z >= 0.0:
                return 1.0 / (1.0 + math.exp(-min(z, _EXP_MAX)))
            e = math.exp(max(z, -_EXP_MAX))
            return e / (1.0 + e)
        if family == "extreme-value":
            if z > 700.0:
                return 1.0
            return 1.0 - math.exp(-math.exp(min(z, _EXP_MAX)))
        if family == "skewed-logistic":
            if z < -700.0:
                return 0.0
            return (1.0 + math.exp(-min(z, _EXP_MAX))) ** (-self.shape)
        if family == "cauchy":
            return 0.5 + math.atan(z) / math.pi
        raise AssertionError(family)

    def level_quantile(self, p: float) -> float:
        """Working-scale level at which the response probability equals p."""
        if not 0.0 < p < 1.0:
            raise ValueError(f"probability must be in (0, 1), got {p}")
        family = self.family
        if family in ("probit-log", "normal"):
            z = norm_quantile(p)
        elif family == "uniform":
            z = p
        elif family == "logistic":
            z = math.log(p / (1.0 - p))
        elif family == "extreme-value":
            z = math.log(-math.log1p(-p))
        elif family == "skewed-logistic":
            z = -math.log(p ** (-1.0 / self.shape) - 1.0)
        elif family == "cauchy":
            z = math.tan(math.pi * (p - 0.5))
        else:
            raise AssertionError(family)
        return self.location + self.scale * z


def model_cdf(model: ResponseModel, x: float) -> float:
    return model.cdf(x)


def model_quantile(model: ResponseModel, p: float) -> float:
    return model.quantile(p)


def bisect_quantile(cdf, p: float, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Invert a monotone cdf by bisection.  Deliberately simple; used as an
    independent cross-check of the closed-form quantiles."""
    if not cdf(lo) <= p <= cdf(hi):
        raise ValueError("bracket does not contain the target probability")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
