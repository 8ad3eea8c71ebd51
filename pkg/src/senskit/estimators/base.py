"""Shared quantile-estimate container.

A Fieller-type confidence set need not be a bounded interval: depending
on the information about the slope it can be a half-line, the complement
of an interval ("two-rays"), or the whole line.  Those outcomes are
legitimate results and are carried explicitly instead of being truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = ["QuantileEstimate"]


@dataclass(frozen=True, slots=True)
class QuantileEstimate:
    """Point and confidence set for one quantile.

    ``kind`` is "interval" (the set is [lo, hi], possibly with infinite
    endpoints), "two-rays" (the set is (-inf, lo] U [hi, inf)) or
    "whole-line".  Values live on whatever axis the estimator was fed
    (log-stimulus for probit fits of physical data); ``exp()`` maps an
    estimate from the log axis to natural units.
    """

    p: float
    point: float
    lo: float
    hi: float
    level: float
    method: str
    kind: str = "interval"

    def __post_init__(self) -> None:
        if self.kind not in ("interval", "two-rays", "whole-line"):
            raise ValueError(f"unknown confidence-set kind {self.kind!r}")

    @property
    def bounded(self) -> bool:
        return self.kind == "interval" and math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def width(self) -> float:
        """Length of the confidence set; infinite unless a bounded interval."""
        return self.hi - self.lo if self.bounded else math.inf

    def contains(self, value: float) -> bool:
        if self.kind == "whole-line":
            return True
        if self.kind == "two-rays":
            return value <= self.lo or value >= self.hi
        return self.lo <= value <= self.hi

    def exp(self) -> "QuantileEstimate":
        """Map a log-axis estimate to natural units (monotone, so the set
        structure is preserved; -inf maps to 0)."""
        return replace(
            self,
            point=math.exp(self.point),
            lo=math.exp(self.lo) if self.lo != -math.inf else 0.0,
            hi=math.exp(self.hi) if self.hi != math.inf else math.inf,
        )
