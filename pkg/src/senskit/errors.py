"""Typed failure modes.

Statistical failures (undefined estimates, out-of-range inversions) are
distinct from configuration mistakes so callers — the CLI in particular —
can map them to different exit codes.
"""

from __future__ import annotations

__all__ = [
    "SenskitError",
    "ConfigError",
    "GridError",
    "DesignStateError",
    "EstimationError",
    "UndefinedMleError",
    "NonIdentifiableError",
    "OutOfRangeError",
]


class SenskitError(Exception):
    """Base class for package-specific failures."""


class ConfigError(SenskitError):
    """Invalid or inconsistent configuration."""


class GridError(ConfigError):
    """Stimulus grid violation (unsorted, duplicates, unsatisfiable snap)."""


class DesignStateError(SenskitError):
    """Design state machine misuse (advancing a terminated design, ...)."""


class EstimationError(SenskitError):
    """A statistical estimate could not be produced from the data."""


class UndefinedMleError(EstimationError):
    """Likelihood has no finite maximiser (separation, degenerate data)."""


class NonIdentifiableError(EstimationError):
    """Fit exists but the requested quantity is not identified (beta <= 0)."""


class OutOfRangeError(EstimationError):
    """Requested probability lies outside the fitted response range."""

    def __init__(self, message: str, span: tuple[float, float] | None = None):
        super().__init__(message)
        self.span = span
