"""Centred isotonic regression for dose-response curves.

The estimator has three stages:

1. optional shrinkage of the per-level tallies toward the design target
   (rate (r + t) / (n + 1) with weight n + 1), which keeps levels with
   all-identical outcomes informative under adaptive designs;
2. weighted pool-adjacent-violators (PAVA) for a nondecreasing rate
   sequence;
3. centring: every maximal constant stretch of the fitted sequence is
   collapsed to a single node at the weighted mean stimulus, and the
   estimated curve is the piecewise-linear interpolant of those nodes
   (clamped outside), which makes the curve strictly increasing between
   nodes and hence invertible.

Confidence intervals for a dose quantile invert a pooled one-sided
binomial band around the fitted curve, falling back to a local
delta-method extrapolation when the band does not cross the target rate
inside the observed dose range.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

from ..data import Dataset, level_stats
from ..errors import EstimationError, OutOfRangeError
from ..models import norm_quantile
from .base import QuantileEstimate

__all__ = [
    "IsotonicFit",
    "cir",
    "cir_quantile",
    "pava",
    "pooled_rate_bands",
]

# Per-level input: (stimulus, trials, positives); trials may be fractional
# after shrinkage, so weights are floats throughout.
LevelTallies = Sequence[tuple[float, float, float]]

# Smallest rate rise over a delta-method window that still counts as slope
# information; below this the curve is numerically flat there.
_FLAT_RISE = 1e-9


def pava(values: Sequence[float], weights: Sequence[float]) -> tuple[list[float], list[tuple[int, int]]]:
    """Weighted nondecreasing isotonic fit of ``values``.

    Returns the fitted sequence and the pooled blocks as half-open index
    ranges.  Adjacent blocks with equal means are pooled as well, so the
    block means are strictly increasing.
    """
    if len(values) != len(weights):
        raise EstimationError("values and weights differ in length")
    if any(w <= 0 for w in weights):
        raise EstimationError("weights must be positive")
    # Each block is [weight sum, weighted value sum, start index].
    blocks: list[list[float]] = []
    for i, (y, w) in enumerate(zip(values, weights)):
        blocks.append([float(w), float(w) * float(y), i])
        # Pool while the previous block mean is >= the current one,
        # compared by cross-multiplication to avoid division.
        while len(blocks) > 1 and blocks[-2][1] * blocks[-1][0] >= blocks[-1][1] * blocks[-2][0]:
            w2, s2, _ = blocks.pop()
            blocks[-1][0] += w2
            blocks[-1][1] += s2
    fitted: list[float] = []
    spans: list[tuple[int, int]] = []
    stop = len(values)
    for bw, bs, start in reversed(blocks):
        mean = bs / bw
        fitted[:0] = [mean] * (stop - start)
        spans.insert(0, (start, stop))
        stop = start
    return fitted, spans


@dataclass(frozen=True, slots=True)
class IsotonicFit:
    """A fitted, centred isotonic dose-response curve.

    ``x``/``weight``/``rate`` are the per-level inputs after any
    shrinkage; ``fitted`` is the isotonic rate per level; ``nodes`` are
    the centred (stimulus, rate, weight) block summaries with strictly
    increasing rates.
    """

    x: tuple[float, ...]
    weight: tuple[float, ...]
    rate: tuple[float, ...]
    fitted: tuple[float, ...]
    nodes: tuple[tuple[float, float, float], ...]
    shrink_target: float | None

    @property
    def rate_span(self) -> tuple[float, float]:
        return self.nodes[0][1], self.nodes[-1][1]

    def value_at(self, x: float) -> float:
        """Fitted response rate at ``x`` (clamped outside the node range)."""
        xs = [nx for nx, _, _ in self.nodes]
        ys = [ny for _, ny, _ in self.nodes]
        return _interp(xs, ys, x)

    def quantile(self, p: float) -> float:
        """Stimulus at which the fitted curve reaches rate ``p``.

        Raises :class:`OutOfRangeError` when ``p`` lies outside the span
        of fitted rates, since the clamped curve never attains it.
        """
        lo, hi = self.rate_span
        if not lo <= p <= hi:
            raise OutOfRangeError(
                f"target rate {p:g} outside the fitted span [{lo:g}, {hi:g}]",
                span=(lo, hi),
            )
        xs = [nx for nx, _, _ in self.nodes]
        ys = [ny for _, ny, _ in self.nodes]
        if len(xs) == 1:
            return xs[0]
        k = bisect.bisect_left(ys, p)
        if k == 0:
            return xs[0]
        x0, x1 = xs[k - 1], xs[k]
        y0, y1 = ys[k - 1], ys[k]
        return x0 + (p - y0) * (x1 - x0) / (y1 - y0)


def _as_tallies(data: Dataset | LevelTallies) -> list[tuple[float, float, float]]:
    if isinstance(data, Dataset):
        return [(float(x), float(n), float(r)) for x, n, r in level_stats(data)]
    out = [(float(x), float(n), float(r)) for x, n, r in data]
    if not out:
        raise EstimationError("no levels to fit")
    if any(n <= 0 or r < 0 or r > n for _, n, r in out):
        raise EstimationError("each level needs n > 0 trials and 0 <= r <= n positives")
    if sorted(x for x, _, _ in out) != [x for x, _, _ in out]:
        out.sort(key=lambda t: t[0])
    return out


def cir(data: Dataset | LevelTallies, shrink_target: float | None = None) -> IsotonicFit:
    """Fit a centred isotonic curve to per-level tallies.

    With ``shrink_target`` set, each level's rate becomes
    (r + target) / (n + 1) with working weight n + 1 before the isotonic
    stage; use the design's target rate here for adaptively collected
    data.  Physical datasets are fitted on the natural stimulus axis.
    """
    tallies = _as_tallies(data)
    if shrink_target is not None and not 0.0 < shrink_target < 1.0:
        raise EstimationError(f"shrink target must be in (0, 1), got {shrink_target}")
    x = tuple(t[0] for t in tallies)
    if shrink_target is None:
        weight = tuple(t[1] for t in tallies)
        rate = tuple(t[2] / t[1] for t in tallies)
    else:
        weight = tuple(t[1] + 1.0 for t in tallies)
        rate = tuple((t[2] + shrink_target) / (t[1] + 1.0) for t in tallies)

    fitted, spans = pava(rate, weight)
    nodes = []
    for start, stop in spans:
        bw = sum(weight[start:stop])
        bx = sum(weight[i] * x[i] for i in range(start, stop)) / bw
        nodes.append((bx, fitted[start], bw))
    return IsotonicFit(
        x=x,
        weight=weight,
        rate=rate,
        fitted=tuple(fitted),
        nodes=tuple(nodes),
        shrink_target=shrink_target,
    )


def _interp(xs: Sequence[float], ys: Sequence[float], x: float) -> float:
    """Piecewise-linear interpolation through (xs, ys), clamped outside."""
    if x <= xs[0]:
        return ys[0]
    if x >= xs[-1]:
        return ys[-1]
    k = bisect.bisect_right(xs, x)
    x0, x1 = xs[k - 1], xs[k]
    y0, y1 = ys[k - 1], ys[k]
    if x1 == x0:
        return y1
    return y0 + (x - x0) * (y1 - y0) / (x1 - x0)


def _wilson_bounds(successes: float, trials: float, z: float) -> tuple[float, float]:
    """One-sided score (Wilson) bounds, each at confidence Phi(z)."""
    centre = (successes + 0.5 * z * z) / (trials + z * z)
    q = successes / trials
    half = (z / (trials + z * z)) * math.sqrt(q * (1.0 - q) * trials + 0.25 * z * z)
    return max(0.0, centre - half), min(1.0, centre + half)


def pooled_rate_bands(fit: IsotonicFit, level: float) -> tuple[list[float], list[float]]:
    """Monotone lower/upper rate bounds at each design point.

    The bound at point j pools it with neighbours on one side before
    applying the score interval -- later points for the upper bound and
    earlier points for the lower bound, taking the tightest pool -- then
    both bands are monotonised so they can be inverted.
    """
    z = norm_quantile(0.5 * (1.0 + level))
    m = len(fit.x)
    counts = [fit.rate[j] * fit.weight[j] for j in range(m)]
    upper = [1.0] * m
    lower = [0.0] * m
    for j in range(m):
        s = n = 0.0
        best = 1.0
        for k in range(j, m):
            s += counts[k]
            n += fit.weight[k]
            best = min(best, _wilson_bounds(s, n, z)[1])
        upper[j] = best
        s = n = 0.0
        best = 0.0
        for i in range(j, -1, -1):
            s += counts[i]
            n += fit.weight[i]
            best = max(best, _wilson_bounds(s, n, z)[0])
        lower[j] = best
    # Monotonise: running minimum from the right / maximum from the left.
    for j in range(m - 2, -1, -1):
        upper[j] = min(upper[j], upper[j + 1])
    for j in range(1, m):
        lower[j] = max(lower[j], lower[j - 1])
    return lower, upper


def _crossing_segment(fit: IsotonicFit, p: float) -> float:
    """Length of the node segment on which the curve crosses p; used as the
    window for delta-method slope estimates."""
    xs = [nx for nx, _, _ in fit.nodes]
    ys = [ny for _, ny, _ in fit.nodes]
    k = max(1, min(bisect.bisect_left(ys, p), len(ys) - 1))
    return xs[k] - xs[k - 1]


def _rising_crossing(xs: Sequence[float], ys: Sequence[float], p: float) -> float | None:
    """Leftmost x where the nondecreasing polyline (xs, ys) reaches p,
    or None when it stays below p or is already above it at the left end."""
    if ys[0] >= p or ys[-1] < p:
        return None
    k = next(j for j in range(1, len(ys)) if ys[j] >= p)
    return xs[k - 1] + (p - ys[k - 1]) * (xs[k] - xs[k - 1]) / (ys[k] - ys[k - 1])


def cir_quantile(
    fit: IsotonicFit,
    p: float,
    level: float = 0.9,
) -> QuantileEstimate:
    """Dose quantile estimate with a band-inversion confidence interval.

    The point estimate inverts the centred curve at rate ``p``.  The
    interval endpoints invert the pooled rate bands where they cross
    ``p`` inside the observed dose range; when a band sits beyond the
    target at the range edge, the endpoint is extrapolated from the point
    estimate by the delta method, using the curve's mean slope over one
    crossing-segment length on that side.
    """
    if not 0.0 < p < 1.0:
        raise EstimationError(f"target probability must be in (0, 1), got {p}")
    point = fit.quantile(p)
    method = "cir-band"
    if len(fit.nodes) < 2:
        # A single node carries no slope information.
        return QuantileEstimate(p, point, -math.inf, math.inf, level, method)

    lower, upper = pooled_rate_bands(fit, level)
    xs = list(fit.x)
    h = _crossing_segment(fit, p)

    lo = _rising_crossing(xs, upper, p)
    if lo is None:
        # The upper band is above p across the range (or never reaches it):
        # extrapolate left of the point estimate along the mean curve slope
        # over one crossing-segment length.  A numerically flat window means
        # the data carry no slope information on that side; that is reported
        # as an unbounded endpoint rather than a wild extrapolation.
        rise = fit.value_at(point) - fit.value_at(point - h)
        excess = max(0.0, _interp(xs, upper, point) - p)
        lo = point - excess * h / rise if rise > _FLAT_RISE else -math.inf

    # For the upper endpoint, search the lower band from the right: the
    # rightmost x where it is still <= p.
    hi = None
    if lower[-1] > p and lower[0] <= p:
        k = next(j for j in range(len(lower) - 1, 0, -1) if lower[j - 1] <= p)
        hi = xs[k - 1] + (p - lower[k - 1]) * (xs[k] - xs[k - 1]) / (lower[k] - lower[k - 1])
    if hi is None:
        rise = fit.value_at(point + h) - fit.value_at(point)
        deficit = max(0.0, p - _interp(xs, lower, point))
        hi = point + deficit * h / rise if rise > _FLAT_RISE else math.inf

    # The interval always contains the point estimate; degenerate bands
    # (possible with very sparse pools) are clamped rather than crossed.
    lo = min(lo, point)
    hi = max(hi, point)
    return QuantileEstimate(p, point, lo, hi, level, method)
