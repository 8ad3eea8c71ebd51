"""Probit maximum likelihood on grouped dose-response data.

The model is P(positive at covariate w) = Phi(alpha + beta * w); for
physical stimuli the covariate is the log stimulus, so beta > 0 means the
response probability rises with the load.  Fits are computed by damped
Newton steps using the expected (Fisher) information, which for the
probit likelihood is

    J(theta) = sum_j n_j * pdf(eta_j)^2 / (Phi(eta_j) (1 - Phi(eta_j))) * z_j z_j^T

with z_j = (1, w_j).  Quantile confidence sets come from Fieller's
theorem applied to the ratio (Phi^{-1}(p) - alpha) / beta, which can
produce unbounded sets when the slope is poorly determined; those are
reported as such (see :class:`QuantileEstimate`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from ..data import Dataset, level_stats
from ..errors import EstimationError, NonIdentifiableError, UndefinedMleError
from ..models import ProbitTheta, norm_pdf, norm_quantile
from .base import QuantileEstimate

__all__ = [
    "LevelCounts",
    "MleFit",
    "dataset_levels",
    "fit_probit_levels",
    "fit_probit_mle",
    "fieller_interval",
    "information_matrix",
    "probit_loglik",
    "w_statistic",
]

# Grouped data as (covariate, trials, positives) triples.
LevelCounts = Sequence[tuple[float, int, int]]

_GRAD_TOL = 1e-8
_MAX_ITER = 100
# Beyond |eta| ~ 37 the normal cdf is exactly 0/1 in doubles; clip the
# per-level probabilities away from the boundary instead.
_P_FLOOR = 1e-300


@dataclass(frozen=True, slots=True)
class MleFit:
    """A converged probit fit with its inverse-information covariance."""

    alpha: float
    beta: float
    cov: tuple[tuple[float, float], tuple[float, float]]
    loglik: float
    iterations: int
    levels: tuple[tuple[float, int, int], ...]

    @property
    def n_trials(self) -> int:
        return sum(n for _, n, _ in self.levels)

    @property
    def monotone(self) -> bool:
        """True when the fitted response probability increases with the
        covariate (beta > 0); quantile inversion requires this."""
        return self.beta > 0.0

    @property
    def theta(self) -> ProbitTheta:
        if not self.monotone:
            raise NonIdentifiableError(
                f"fitted slope {self.beta:.6g} is not positive; "
                "no increasing sensitivity curve to invert"
            )
        return ProbitTheta(alpha=self.alpha, beta=self.beta)

    def predicted(self, w: float) -> float:
        return float(ndtr(self.alpha + self.beta * w))


def dataset_levels(data: Dataset) -> tuple[tuple[float, int, int], ...]:
    """Grouped (log-stimulus, trials, positives) triples for a dataset."""
    return tuple(
        (math.log(stimulus), n, r) for stimulus, n, r in level_stats(data)
    )


def _validated(levels: LevelCounts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not levels:
        raise EstimationError("no levels to fit")
    w = np.asarray([lv[0] for lv in levels], dtype=float)
    n = np.asarray([lv[1] for lv in levels], dtype=float)
    r = np.asarray([lv[2] for lv in levels], dtype=float)
    if np.any(n < 1) or np.any(r < 0) or np.any(r > n):
        raise EstimationError("each level needs n >= 1 trials and 0 <= r <= n positives")
    if not np.all(np.isfinite(w)):
        raise EstimationError("non-finite covariate value")
    return w, n, r


def _check_mle_exists(w: np.ndarray, n: np.ndarray, r: np.ndarray) -> None:
    """A finite probit MLE exists iff neither outcome can be separated
    from the other by a threshold: some positive must lie strictly below
    some negative, and some positive strictly above some negative."""
    pos = w[r > 0]
    neg = w[r < n]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMleError(
            "all outcomes identical; the likelihood has no interior maximum"
        )
    if not (pos.min() < neg.max() and pos.max() > neg.min()):
        raise UndefinedMleError(
            "positives and negatives are separated on the covariate axis; "
            "the likelihood increases without bound along the slope"
        )


def probit_loglik(levels: LevelCounts, alpha: float, beta: float) -> float:
    """Grouped binomial log likelihood (binomial coefficients omitted)."""
    w, n, r = _validated(levels)
    eta = alpha + beta * w
    return float(np.sum(r * log_ndtr(eta) + (n - r) * log_ndtr(-eta)))


def information_matrix(levels: LevelCounts, alpha: float, beta: float) -> np.ndarray:
    """Expected information of the grouped probit likelihood at (alpha, beta)."""
    w, n, _ = _validated(levels)
    eta = alpha + beta * w
    p = np.clip(ndtr(eta), _P_FLOOR, 1.0 - 1e-16)
    phi = np.exp(-0.5 * eta * eta) / math.sqrt(2.0 * math.pi)
    u = n * phi * phi / (p * (1.0 - p))
    j11 = float(np.sum(u))
    j12 = float(np.sum(u * w))
    j22 = float(np.sum(u * w * w))
    return np.array([[j11, j12], [j12, j22]])


def _score(w: np.ndarray, n: np.ndarray, r: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    eta = alpha + beta * w
    p = np.clip(ndtr(eta), _P_FLOOR, 1.0 - 1e-16)
    phi = np.exp(-0.5 * eta * eta) / math.sqrt(2.0 * math.pi)
    resid = (r - n * p) * phi / (p * (1.0 - p))
    return np.array([float(np.sum(resid)), float(np.sum(resid * w))])


def _start_values(w: np.ndarray, n: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """Least-squares probit regression of lightly shrunk empirical rates."""
    z = ndtri((r + 0.5) / (n + 1.0))
    wbar = float(np.average(w, weights=n))
    zbar = float(np.average(z, weights=n))
    sww = float(np.sum(n * (w - wbar) ** 2))
    if sww <= 0.0:
        return zbar, 1.0
    beta0 = float(np.sum(n * (w - wbar) * (z - zbar))) / sww
    if abs(beta0) < 1e-6:
        beta0 = math.copysign(1e-6, beta0 if beta0 != 0.0 else 1.0)
    return zbar - beta0 * wbar, beta0


def fit_probit_levels(levels: LevelCounts) -> MleFit:
    """Fit the two-parameter probit model to grouped counts.

    Raises :class:`UndefinedMleError` when the data are separated (no
    finite maximiser) or the Newton iteration fails to converge within
    the iteration cap.
    """
    w, n, r = _validated(levels)
    _check_mle_exists(w, n, r)

    alpha, beta = _start_values(w, n, r)
    lev = tuple((float(a), int(b), int(c)) for a, b, c in zip(w, n, r))
    ll = probit_loglik(lev, alpha, beta)
    iterations = 0
    for iterations in range(1, _MAX_ITER + 1):
        g = _score(w, n, r, alpha, beta)
        if float(np.max(np.abs(g))) < _GRAD_TOL:
            break
        info = information_matrix(lev, alpha, beta)
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError as exc:
            raise UndefinedMleError(f"singular information matrix: {exc}") from exc
        # Damped ascent: halve the step until the likelihood improves.
        scale = 1.0
        for _ in range(40):
            cand_a = alpha + scale * step[0]
            cand_b = beta + scale * step[1]
            cand_ll = probit_loglik(lev, cand_a, cand_b)
            if cand_ll > ll - 1e-13:
                break
            scale *= 0.5
        else:
            raise UndefinedMleError("step halving failed to improve the likelihood")
        alpha, beta, ll = cand_a, cand_b, cand_ll
    else:
        raise UndefinedMleError(
            f"no convergence after {_MAX_ITER} Newton iterations "
            f"(gradient max-norm {float(np.max(np.abs(g))):.3g})"
        )

    info = information_matrix(lev, alpha, beta)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise UndefinedMleError(f"singular information at the optimum: {exc}") from exc
    return MleFit(
        alpha=float(alpha),
        beta=float(beta),
        cov=((float(cov[0, 0]), float(cov[0, 1])), (float(cov[1, 0]), float(cov[1, 1]))),
        loglik=float(ll),
        iterations=iterations,
        levels=lev,
    )


def fit_probit_mle(data: Dataset) -> MleFit:
    """Fit the probit-on-log-stimulus model to a physical dataset."""
    return fit_probit_levels(dataset_levels(data))


def _quadratic_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Real roots of a m^2 + b m + c, numerically stable, ascending."""
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise ValueError("negative discriminant")
    s = math.sqrt(disc)
    qq = -0.5 * (b + math.copysign(s, b)) if b != 0.0 else 0.5 * s
    if qq == 0.0:
        return 0.0, 0.0
    r1, r2 = qq / a, c / qq
    return (r1, r2) if r1 <= r2 else (r2, r1)


def fieller_interval(fit: MleFit, p: float, level: float = 0.9) -> QuantileEstimate:
    """Fieller confidence set for the covariate value with response
    probability ``p``.

    The set is {m : (alpha + beta m - q)^2 <= c (v11 + 2 m v12 + m^2 v22)}
    with q = Phi^{-1}(p) and c the chi-square(1) critical value, i.e. the
    solution set of a quadratic inequality.  When the slope is not
    significantly positive the set is a half-line, two rays, or the whole
    line; these are returned with the matching ``kind`` rather than
    clipped.
    """
    if not 0.0 < p < 1.0:
        raise EstimationError(f"target probability must be in (0, 1), got {p}")
    if not 0.0 < level < 1.0:
        raise EstimationError(f"confidence level must be in (0, 1), got {level}")
    if not fit.monotone:
        raise NonIdentifiableError(
            f"fitted slope {fit.beta:.6g} is not positive; quantiles of a "
            "non-increasing fit are not identified"
        )
    q = norm_quantile(p)
    z = norm_quantile(0.5 * (1.0 + level))
    c = z * z
    (v11, v12), (_, v22) = fit.cov
    point = (q - fit.alpha) / fit.beta

    a = fit.beta * fit.beta - c * v22
    b = 2.0 * (fit.beta * (fit.alpha - q) - c * v12)
    k = (fit.alpha - q) ** 2 - c * v11
    method = "fieller-probit"

    if abs(a) < 1e-300:
        # Degenerate quadratic: b m + k <= 0 is a half-line.
        if b > 0.0:
            return QuantileEstimate(p, point, -math.inf, -k / b, level, method)
        if b < 0.0:
            return QuantileEstimate(p, point, -k / b, math.inf, level, method)
        if k <= 0.0:
            return QuantileEstimate(p, point, -math.inf, math.inf, level, method, "whole-line")
        raise EstimationError("empty Fieller set; inconsistent covariance input")
    if a > 0.0:
        # Slope significantly positive: an ordinary bounded interval.
        try:
            lo, hi = _quadratic_roots(a, b, k)
        except ValueError as exc:
            # Cannot happen with a positive-semidefinite covariance; a
            # negative discriminant here means the inputs were inconsistent.
            raise EstimationError("empty Fieller set; inconsistent covariance input") from exc
        return QuantileEstimate(p, point, lo, hi, level, method)
    # Slope not significant: the parabola opens downward.
    disc = b * b - 4.0 * a * k
    if disc < 0.0:
        return QuantileEstimate(p, point, -math.inf, math.inf, level, method, "whole-line")
    lo, hi = _quadratic_roots(a, b, k)
    return QuantileEstimate(p, point, lo, hi, level, method, "two-rays")


def w_statistic(fit: MleFit, direction: Iterable[float]) -> float:
    """Squared studentised projection of the fit along ``direction``.

    For direction f the statistic is (f . theta_hat)^2 / (f^T V f); under
    the model with f orthogonal-normalised against the truth it follows a
    chi-square(1) law asymptotically.
    """
    f = np.asarray(tuple(direction), dtype=float)
    if f.shape != (2,):
        raise EstimationError("direction must have two components")
    v = np.asarray(fit.cov)
    den = float(f @ v @ f)
    if den <= 0.0:
        raise EstimationError("direction has non-positive variance under the fit")
    num = float(f @ np.array([fit.alpha, fit.beta])) ** 2
    return num / den
