"""Stimulus grids for apparatus-constrained designs.

The BAM friction apparatus realises a load as a weight hung at one of six
lever notches; Table-style builtin grids cover the three natural readings
of "the available loads":

* ``bam-default``  — the default load list from the friction test manual
  (9 loads, notch 6 with the weight varied, except 5 N which needs notch 1,
  and no 160 N entry),
* ``notch-6``      — notch 6 across all nine weights plus the 5 N minimum
  (10 loads; includes 160 N),
* ``all-intermediate`` — every weight/notch combination pooled (41 loads).

A drop-weight (fallhammer) energy grid is included for impact staircases.
Loads are in the grid's stated unit; design arithmetic elsewhere is done
on log-stimulus, grids only quantise the physical recommendation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import GridError

__all__ = [
    "StimulusGrid",
    "FRICTION_WEIGHTS",
    "friction_label",
    "builtin_grid",
    "builtin_grid_names",
    "snap_to_grid",
]

SNAP_POLICIES = ("nearest", "nearest-above", "nearest-below")

# BAM friction machine: weight id -> (mass in kg, load in N at notches 1..6).
FRICTION_WEIGHTS: dict[str, tuple[float, tuple[int, ...]]] = {
    "B1": (0.28, (5, 6, 7, 8, 9, 10)),
    "B2": (0.56, (10, 12, 14, 16, 18, 20)),
    "B3": (1.12, (20, 24, 28, 32, 36, 40)),
    "B4": (1.68, (30, 36, 42, 48, 54, 60)),
    "B5": (2.24, (40, 48, 56, 64, 72, 80)),
    "B6": (3.36, (60, 72, 84, 96, 108, 120)),
    "B7": (4.48, (80, 96, 112, 128, 144, 160)),
    "B8": (6.72, (120, 144, 168, 192, 216, 240)),
    "B9": (10.08, (180, 216, 252, 288, 324, 360)),
}

# First weight/notch combination realising each load, scanning weights in
# ascending order.  Duplicated loads (e.g. 80 N = B5/6 = B7/1) resolve to
# the lightest weight.
_FRICTION_LABELS: dict[float, str] = {}
for _wid, (_mass, _loads) in FRICTION_WEIGHTS.items():
    for _notch, _load in enumerate(_loads, start=1):
        _FRICTION_LABELS.setdefault(float(_load), f"{_wid}/{_notch}")


def friction_label(load: float) -> str | None:
    """Weight/notch label ("B5/6") if the load is a friction-table cell."""
    for value, label in _FRICTION_LABELS.items():
        if math.isclose(load, value, rel_tol=1e-9):
            return label
    return None


@dataclass(frozen=True)
class StimulusGrid:
    """Strictly ascending set of realisable stimulus levels."""

    values: tuple[float, ...]
    unit: str = "N"
    name: str | None = None
    labels: tuple[str | None, ...] | None = None

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise GridError("grid needs at least two levels")
        if any(not v > 0.0 for v in vals):
            raise GridError("grid levels must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise GridError("grid levels must be strictly ascending (no duplicates)")
        object.__setattr__(self, "values", vals)
        if self.labels is not None and len(self.labels) != len(vals):
            raise GridError("labels must align with grid values")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def minimum(self) -> float:
        return self.values[0]

    @property
    def maximum(self) -> float:
        return self.values[-1]

    def index_of(self, value: float) -> int:
        for i, v in enumerate(self.values):
            if math.isclose(value, v, rel_tol=1e-9, abs_tol=1e-12):
                return i
        raise GridError(f"{value} is not a level of grid {self.name or self.values}")

    def label_at(self, index: int) -> str | None:
        if self.labels is not None:
            return self.labels[index]
        return friction_label(self.values[index])

    def midrange_index(self) -> int:
        """Index of the level nearest the middle of the range, middle taken
        on the log scale (stimulus arithmetic is multiplicative)."""
        target = 0.5 * (math.log(self.minimum) + math.log(self.maximum))
        dists = [abs(math.log(v) - target) for v in self.values]
        return dists.index(min(dists))


def _friction_grid(values: list[int], name: str) -> StimulusGrid:
    return StimulusGrid(tuple(float(v) for v in values), unit="N", name=name)


def _all_intermediate() -> StimulusGrid:
    pooled = sorted({float(v) for _, loads in FRICTION_WEIGHTS.values() for v in loads})
    return StimulusGrid(tuple(pooled), unit="N", name="all-intermediate")


_FALLHAMMER = StimulusGrid(
    values=(1.0, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 50.0),
    unit="J",
    name="fallhammer",
    labels=(
        "1kg/10cm", "1kg/20cm", "1kg/30cm", "1kg/40cm", "1kg/50cm",
        "5kg/15cm", "5kg/20cm", "5kg/30cm", "5kg/40cm", "5kg/50cm", "5kg/60cm",
        "10kg/35cm", "10kg/40cm", "10kg/50cm",
    ),
)

_BUILTIN: dict[str, StimulusGrid] = {
    "bam-default": _friction_grid([5, 10, 20, 40, 60, 80, 120, 240, 360], "bam-default"),
    "notch-6": _friction_grid([5, 10, 20, 40, 60, 80, 120, 160, 240, 360], "notch-6"),
    "all-intermediate": _all_intermediate(),
    "fallhammer": _FALLHAMMER,
}

_ALIASES = {
    "default": "bam-default",
    "bam": "bam-default",
    "notch6": "notch-6",
    "all": "all-intermediate",
    "all-loads": "all-intermediate",
}


def builtin_grid_names() -> tuple[str, ...]:
    return tuple(_BUILTIN)


def builtin_grid(name: str) -> StimulusGrid:
    key = _ALIASES.get(name.lower(), name.lower())
    try:
        return _BUILTIN[key]
    except KeyError:
        raise GridError(
            f"unknown grid {name!r}; builtin grids: {', '.join(_BUILTIN)}"
        ) from None


def snap_to_grid(x: float, grid: StimulusGrid, policy: str = "nearest") -> float:
    """Map a proposed stimulus onto a realisable grid level.

    ``nearest`` breaks ties downward; the one-sided policies raise when no
    level exists on the requested side (the proposal fell off the grid).
    """
    if policy not in SNAP_POLICIES:
        raise GridError(f"unknown snap policy {policy!r}; choose from {SNAP_POLICIES}")
    values = grid.values
    if policy == "nearest-above":
        for v in values:
            if v >= x or math.isclose(v, x, rel_tol=1e-12):
                return v
        raise GridError(f"no grid level at or above {x} (grid max {grid.maximum})")
    if policy == "nearest-below":
        for v in reversed(values):
            if v <= x or math.isclose(v, x, rel_tol=1e-12):
                return v
        raise GridError(f"no grid level at or below {x} (grid min {grid.minimum})")
    best = values[0]
    best_d = abs(x - best)
    for v in values[1:]:
        d = abs(x - v)
        if d < best_d and not math.isclose(d, best_d, rel_tol=1e-12):
            best, best_d = v, d
    return best
