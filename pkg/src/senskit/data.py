"""Datasets of binary trials and the packaged reference data.

The on-disk format is delimiter-separated text with a header
``index,stimulus,unit,outcome,label`` and optional ``#`` comment lines.
Four PETN friction datasets ship with the package and are addressable by
alias: two complete staircase runs (``petn_table3`` on the default-load
ladder, ``petn_table4`` with every intermediate load available) and two
biased-coin runs recorded as per-load tallies (``petn_table5``,
``petn_table6``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .designs import TrialRecord
from .errors import ConfigError
from .models import ProbitTheta

__all__ = [
    "Dataset",
    "read_dataset",
    "write_dataset",
    "parse_dataset",
    "format_dataset",
    "fixture_dataset",
    "fixture_names",
    "level_stats",
    "dataset_from_pairs",
    "PETN_THETA",
]

# Probit-on-log parameters fitted to historical PETN friction data; the
# reference ground truth for the simulation studies (median ~86.3 N).
PETN_THETA = ProbitTheta(alpha=-9.1258, beta=2.0473)

_FIXTURES = {
    "petn_table3": "petn_table3.csv",
    "petn_table4": "petn_table4.csv",
    "petn_table5": "petn_table5.csv",
    "petn_table6": "petn_table6.csv",
}

_HEADER = ["index", "stimulus", "unit", "outcome", "label"]


@dataclass(frozen=True)
class Dataset:
    """An ordered sequence of binary trials in one stimulus unit."""

    trials: tuple[TrialRecord, ...]
    unit: str = "N"
    name: str | None = None

    def __post_init__(self) -> None:
        for i, t in enumerate(self.trials, start=1):
            if t.index != i:
                raise ConfigError(f"trial indices must run 1..n; trial {i} has index {t.index}")

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def n_positive(self) -> int:
        return sum(t.outcome for t in self.trials)


def dataset_from_pairs(pairs, unit: str = "N", name: str | None = None,
                       labels=None) -> Dataset:
    trials = []
    for i, (x, y) in enumerate(pairs, start=1):
        label = labels[i - 1] if labels is not None else None
        trials.append(TrialRecord(index=i, stimulus=float(x),
                                  log_stimulus=math.log(float(x)),
                                  outcome=int(y), grid_label=label))
    return Dataset(trials=tuple(trials), unit=unit, name=name)


def level_stats(dataset: Dataset | list[TrialRecord]) -> list[tuple[float, int, int]]:
    """Collapse trials to sorted per-level tallies (stimulus, trials, positives)."""
    trials = dataset.trials if isinstance(dataset, Dataset) else dataset
    stats: dict[float, list[int]] = {}
    for t in trials:
        cell = stats.setdefault(t.stimulus, [0, 0])
        cell[0] += 1
        cell[1] += t.outcome
    return [(x, n, r) for x, (n, r) in sorted(stats.items())]


def format_dataset(dataset: Dataset, comments: list[str] | None = None) -> str:
    buf = io.StringIO()
    for line in comments or []:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_HEADER)
    for t in dataset.trials:
        writer.writerow([
            t.index,
            format(t.stimulus, ".12g"),
            dataset.unit,
            t.outcome,
            t.grid_label or "",
        ])
    return buf.getvalue()


def parse_dataset(text: str, name: str | None = None) -> Dataset:
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise ConfigError("dataset is empty")
    reader = csv.reader(rows)
    header = next(reader)
    if [h.strip().lower() for h in header[:4]] != _HEADER[:4]:
        raise ConfigError(f"unexpected dataset header {header!r}; expected {_HEADER}")
    trials: list[TrialRecord] = []
    units: set[str] = set()
    for row in reader:
        if len(row) < 4:
            raise ConfigError(f"malformed dataset row: {row!r}")
        index, stimulus, unit, outcome = row[0], float(row[1]), row[2].strip(), int(row[3])
        label = row[4].strip() if len(row) > 4 and row[4].strip() else None
        units.add(unit)
        trials.append(TrialRecord(index=int(index), stimulus=stimulus,
                                  log_stimulus=math.log(stimulus),
                                  outcome=outcome, grid_label=label))
    if len(units) > 1:
        raise ConfigError(f"dataset mixes units: {sorted(units)}")
    return Dataset(trials=tuple(trials), unit=units.pop() if units else "N", name=name)


def write_dataset(dataset: Dataset, path: str | Path,
                  comments: list[str] | None = None) -> None:
    Path(path).write_text(format_dataset(dataset, comments))


def read_dataset(path: str | Path) -> Dataset:
    p = Path(path)
    return parse_dataset(p.read_text(), name=p.stem)


def fixture_names() -> tuple[str, ...]:
    return tuple(_FIXTURES)


def fixture_dataset(alias: str) -> Dataset:
    """Load a packaged dataset by alias (see fixture_names())."""
    try:
        filename = _FIXTURES[alias]
    except KeyError:
        raise ConfigError(
            f"unknown dataset alias {alias!r}; available: {', '.join(_FIXTURES)}"
        ) from None
    text = resources.files("senskit.fixtures").joinpath(filename).read_text()
    return parse_dataset(text, name=alias)
