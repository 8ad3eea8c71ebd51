"""Monte Carlo harness for sequential sensitivity designs.

Replicates are the unit of work: each owns a private counter-based RNG
stream keyed by (master_seed, replicate index), results are reduced in
replicate-index order, and every aggregate can be recomputed from the
optional per-replicate audit log.  Together these make studies
deterministic for a given seed and insensitive to evaluation order (the
replicates are embarrassingly parallel; at desk scale a single process
is fast enough).

All point estimates, interval widths and squared errors are computed on
the working axis (log stimulus for physical models, the model axis for
the abstract families); squared error against the natural-units quantile
is emitted alongside for comparison.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .designs import (
    BcdConfig,
    RmjConfig,
    RmjSchedule,
    UnStaircaseConfig,
    UpDownConfig,
    advance_design,
    bcd_start,
    classify,
    rmj_build_schedule,
    rmj_start,
    un_staircase_run,
    up_down_next,
    up_down_start,
)
from .errors import (
    ConfigError,
    EstimationError,
    NonIdentifiableError,
    OutOfRangeError,
    UndefinedMleError,
)
from .estimators import (
    cir,
    cir_quantile,
    fieller_interval,
    fit_probit_levels,
    rmj_estimate,
    w_statistic,
)
from .grids import StimulusGrid
from .models import ProbitTheta, ResponseModel, norm_cdf
from .rng import replicate_rng
from .serialize import design_from_dict, design_to_dict, model_from_dict, model_to_dict

__all__ = [
    "DEFAULT_STUDY_MODELS",
    "GridStudySummary",
    "LogWStudy",
    "MetricsRow",
    "ReplicateOutcome",
    "StudyConfig",
    "aggregate_outcomes",
    "export_results",
    "ks_distance",
    "logw_study",
    "mse_grid_configs",
    "read_audit",
    "read_results",
    "run_replicate",
    "run_study",
    "study_cell",
    "un_grid_comparison",
    "write_audit",
]

ESTIMATORS = ("mle-fieller", "cir", "rmj")
METHODS = ("up-down-mle", "bcd-cir", "rmj")

# Abstract response curves in standard form (location 0 except the
# centred uniform; scale 1; right-skewed logistic with shape 2).
DEFAULT_STUDY_MODELS: tuple[ResponseModel, ...] = (
    ResponseModel("normal"),
    ResponseModel("uniform", location=-0.5),
    ResponseModel("logistic"),
    ResponseModel("extreme-value"),
    ResponseModel("skewed-logistic", shape=2.0),
    ResponseModel("cauchy"),
)

DEFAULT_P_VALUES = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass(frozen=True, slots=True)
class StudyConfig:
    """One study cell: a response model, a design, and an estimator."""

    model: ResponseModel
    design: UpDownConfig | BcdConfig | RmjConfig
    estimator: str
    p: float
    n: int
    S: int
    level: float = 0.9
    master_seed: int = 0
    randomize_start: bool = False  # RMJ: draw log x1 ~ N(0, tau1^2) per replicate
    shrink: bool = True  # CIR: shrink tallies toward the target p
    label: str = ""

    def __post_init__(self) -> None:
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if not isinstance(self.design, (UpDownConfig, BcdConfig, RmjConfig)):
            raise ConfigError(f"unsupported design config {type(self.design).__name__}")
        if self.estimator == "rmj" and not isinstance(self.design, RmjConfig):
            raise ConfigError("the rmj estimator reads the design's gain schedule; "
                              "pair it with an RmjConfig")
        if self.randomize_start and not isinstance(self.design, RmjConfig):
            raise ConfigError("randomize_start applies only to RMJ designs")
        if isinstance(self.design, RmjConfig) and self.design.n != self.n:
            raise ConfigError(f"design runs {self.design.n} trials but the study says {self.n}")
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"target probability must be in (0, 1), got {self.p}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"confidence level must be in (0, 1), got {self.level}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.S < 1:
            raise ConfigError(f"S must be >= 1, got {self.S}")


@dataclass(frozen=True, slots=True)
class ReplicateOutcome:
    """Per-replicate audit record; aggregates derive from these alone."""

    index: int
    trials: int
    defined: bool
    point: float = math.nan
    lo: float = math.nan
    hi: float = math.nan
    kind: str = "interval"


@dataclass(frozen=True, slots=True)
class MetricsRow:
    """Aggregated metrics for one study cell.

    ``coverage``, ``mse`` and ``mse_natural`` are over defined replicates
    only; ``mean_ci_width`` is over defined replicates whose confidence
    set is a bounded interval (``unbounded_count`` reports the rest);
    undefined_count + defined replicates = S.
    """

    config: StudyConfig
    mse: float
    mse_natural: float
    mean_ci_width: float
    coverage: float
    undefined_count: int
    unbounded_count: int
    mean_trials: float
    classification_rate: float | None = None


def _working_levels(history) -> list[tuple[float, int, int]]:
    """Group trials into (working level, n, r) with lattice rounding so a
    rung revisited via different +/-d orders is one level."""
    counts: dict[float, list[int]] = {}
    for rec in history:
        key = round(rec.log_stimulus, 9)
        slot = counts.setdefault(key, [0, 0])
        slot[0] += 1
        slot[1] += rec.outcome
    return [(w, nr[0], nr[1]) for w, nr in sorted(counts.items())]


def _start_state(config: StudyConfig, rng, schedule: RmjSchedule | None):
    design = config.design
    if isinstance(design, RmjConfig):
        if config.randomize_start:
            design = replace(design, x1=math.exp(rng.normal(0.0, design.tau1)))
        return rmj_start(design, schedule)
    if isinstance(design, UpDownConfig):
        return up_down_start(design)
    return bcd_start(design)


def run_replicate(config: StudyConfig, index: int,
                  schedule: RmjSchedule | None = None) -> ReplicateOutcome:
    """One simulated experiment plus estimation, on a private RNG stream."""
    rng = replicate_rng(config.master_seed, index)
    model = config.model
    state = _start_state(config, rng, schedule)
    for _ in range(config.n):
        w = math.log(state.next_stimulus)
        y = 1 if rng.random() < model.level_prob(w) else 0
        state = advance_design(state, y, rng=rng)
    trials = len(state.history)

    try:
        if config.estimator == "mle-fieller":
            fit = fit_probit_levels(_working_levels(state.history))
            est = fieller_interval(fit, config.p, config.level)
        elif config.estimator == "cir":
            tallies = _working_levels(state.history)
            target = config.p if config.shrink else None
            est = cir_quantile(cir(tallies, shrink_target=target), config.p, config.level)
        else:
            est = rmj_estimate(state, config.level)
    except (UndefinedMleError, NonIdentifiableError, OutOfRangeError):
        return ReplicateOutcome(index=index, trials=trials, defined=False)
    return ReplicateOutcome(
        index=index, trials=trials, defined=True,
        point=est.point, lo=est.lo, hi=est.hi, kind=est.kind,
    )


def _covers(kind: str, lo: float, hi: float, value: float) -> bool:
    if kind == "whole-line":
        return True
    if kind == "two-rays":
        return value <= lo or value >= hi
    return lo <= value <= hi


def aggregate_outcomes(config: StudyConfig,
                       outcomes: Sequence[ReplicateOutcome]) -> MetricsRow:
    """Reduce per-replicate records (in index order) to a MetricsRow."""
    if len(outcomes) != config.S:
        raise EstimationError(f"expected {config.S} replicate records, got {len(outcomes)}")
    ordered = sorted(outcomes, key=lambda o: o.index)
    w0 = config.model.level_quantile(config.p)
    x0 = math.exp(w0)

    sq = sq_nat = widths = 0.0
    covered = defined = bounded = 0
    trials_total = 0
    for o in ordered:
        trials_total += o.trials
        if not o.defined:
            continue
        defined += 1
        sq += (o.point - w0) ** 2
        sq_nat += (math.exp(o.point) - x0) ** 2
        if _covers(o.kind, o.lo, o.hi, w0):
            covered += 1
        if o.kind == "interval" and math.isfinite(o.lo) and math.isfinite(o.hi):
            bounded += 1
            widths += o.hi - o.lo
    return MetricsRow(
        config=config,
        mse=(sq / defined) if defined else math.nan,
        mse_natural=(sq_nat / defined) if defined else math.nan,
        mean_ci_width=(widths / bounded) if bounded else math.nan,
        coverage=(covered / defined) if defined else math.nan,
        undefined_count=config.S - defined,
        unbounded_count=defined - bounded,
        mean_trials=trials_total / config.S,
    )


def run_study(config: StudyConfig, audit_path: str | None = None) -> MetricsRow:
    """Run all S replicates of a cell and aggregate.

    With ``audit_path`` the per-replicate records are persisted as
    delimited text from which :func:`aggregate_outcomes` reproduces the
    returned row exactly.
    """
    schedule = None
    if isinstance(config.design, RmjConfig):
        schedule = rmj_build_schedule(
            config.design.p, config.design.tau1, config.design.beta_approx, config.design.n
        )
    outcomes = [run_replicate(config, i, schedule) for i in range(config.S)]
    if audit_path is not None:
        write_audit(outcomes, audit_path)
    return aggregate_outcomes(config, outcomes)


def write_audit(outcomes: Sequence[ReplicateOutcome], path: str) -> None:
    if not path:
        raise ConfigError("empty audit path")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "trials", "defined", "point", "lo", "hi", "kind"])
        for o in outcomes:
            writer.writerow([o.index, o.trials, int(o.defined),
                             repr(o.point), repr(o.lo), repr(o.hi), o.kind])


def read_audit(path: str) -> list[ReplicateOutcome]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            ReplicateOutcome(
                index=int(row["index"]),
                trials=int(row["trials"]),
                defined=bool(int(row["defined"])),
                point=float(row["point"]),
                lo=float(row["lo"]),
                hi=float(row["hi"]),
                kind=row["kind"],
            )
            for row in reader
        ]


# ---------------------------------------------------------------------------
# study-grid builders


def study_cell(model: ResponseModel, p: float, method: str, *, n: int = 30,
               S: int = 10_000, level: float = 0.9, master_seed: int = 0,
               d: float = 0.5) -> StudyConfig:
    """Build one cell of the design-comparison study.

    Up-and-down and BCD start at the true target quantile with working
    step d; RMJ draws its start from N(0, tau1^2) on the working axis.
    All methods within a cell share the master seed, so the replicate
    streams are common random numbers for paired comparisons.
    """
    w0 = model.level_quantile(p)
    label = f"{model.family}/p={p:g}/{method}"
    if method == "up-down-mle":
        design: UpDownConfig | BcdConfig | RmjConfig = UpDownConfig(x1=math.exp(w0), d=d)
        estimator = "mle-fieller"
        randomize = False
    elif method == "bcd-cir":
        design = BcdConfig(x1=math.exp(w0), d=d, p=p)
        estimator = "cir"
        randomize = False
    elif method == "rmj":
        design = RmjConfig(p=p, n=n, x1=1.0, tau1=1.0)
        estimator = "rmj"
        randomize = True
    else:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    return StudyConfig(
        model=model, design=design, estimator=estimator, p=p, n=n, S=S,
        level=level, master_seed=master_seed, randomize_start=randomize,
        label=label,
    )


def mse_grid_configs(*, n: int = 30, S: int = 10_000, level: float = 0.9,
                     master_seed: int = 0, d: float = 0.5,
                     models: Sequence[ResponseModel] = DEFAULT_STUDY_MODELS,
                     p_values: Sequence[float] = DEFAULT_P_VALUES,
                     methods: Sequence[str] = METHODS) -> list[StudyConfig]:
    """The full (model, p, method) comparison grid at one sample size."""
    return [
        study_cell(model, p, method, n=n, S=S, level=level,
                   master_seed=master_seed, d=d)
        for model in models
        for p in p_values
        for method in methods
    ]


# ---------------------------------------------------------------------------
# limiting-stimulus grid comparison


@dataclass(frozen=True, slots=True)
class GridStudySummary:
    """Distribution of the limiting stimulus on one grid."""

    grid_name: str
    S: int
    threshold: float
    distribution: tuple[tuple[float | None, int], ...]
    classification_rate: float
    mean_trials: float


def un_grid_comparison(model: ResponseModel, grid_a: StimulusGrid,
                       grid_b: StimulusGrid, k_negatives: int,
                       limiting_type: str, threshold: float, S: int,
                       master_seed: int = 0, *, initial_stage: bool = False,
                       start: float | str = "grid-max"
                       ) -> tuple[GridStudySummary, GridStudySummary]:
    """Run the same staircase procedure on two grids, same response curve.

    Returns the paired per-grid summaries: the empirical distribution of
    the limiting stimulus, the rate of "sensitive" classifications at the
    threshold, and the mean number of trials.
    """
    if S < 1:
        raise ConfigError(f"S must be >= 1, got {S}")
    summaries = []
    for offset, grid in ((0, grid_a), (1, grid_b)):
        config = UnStaircaseConfig(
            grid=grid, k_negatives=k_negatives, limiting_type=limiting_type,
            initial_stage=initial_stage, start=start,
        )
        counts: dict[float | None, int] = {}
        trials_total = 0
        sensitive = 0
        for i in range(S):
            rng = replicate_rng(master_seed, 2 * i + offset)
            result = un_staircase_run(
                config, lambda x: 1 if rng.random() < model.cdf(x) else 0
            )
            counts[result.value] = counts.get(result.value, 0) + 1
            trials_total += len(result.trials)
            if classify(result.value, threshold) == "sensitive":
                sensitive += 1
        dist = tuple(sorted(
            counts.items(), key=lambda kv: (kv[0] is None, kv[0] if kv[0] is not None else 0.0)
        ))
        summaries.append(GridStudySummary(
            grid_name=grid.name, S=S, threshold=threshold, distribution=dist,
            classification_rate=sensitive / S, mean_trials=trials_total / S,
        ))
    return summaries[0], summaries[1]


# ---------------------------------------------------------------------------
# sampling-distribution study for the studentised log-median statistic


@dataclass(frozen=True, slots=True)
class LogWStudy:
    sample: tuple[float, ...]  # log W per defined replicate, run order
    undefined_count: int
    ks_distance: float
    S: int
    n: int
    x1: float
    d: float
    master_seed: int

    @property
    def undefined_fraction(self) -> float:
        return self.undefined_count / self.S


def log_chi2_1_cdf(t: float) -> float:
    """cdf of log(Z^2) for standard normal Z: 2 Phi(e^{t/2}) - 1."""
    return 2.0 * norm_cdf(math.exp(0.5 * t)) - 1.0


def ks_distance(sample: Sequence[float], cdf: Callable[[float], float]) -> float:
    """Kolmogorov-Smirnov sup distance between a sample and a smooth cdf."""
    if not sample:
        raise EstimationError("empty sample")
    xs = sorted(sample)
    m = len(xs)
    dist = 0.0
    for i, x in enumerate(xs):
        f = cdf(x)
        dist = max(dist, abs((i + 1) / m - f), abs(i / m - f))
    return dist


def logw_study(theta0: ProbitTheta, x1: float = 360.0, d: float = 0.2,
               n: int = 100, S: int = 10_000, master_seed: int = 0) -> LogWStudy:
    """Sampling distribution of the studentised statistic for the log
    median under an up-and-down design.

    Each replicate runs the design against the probit-on-log truth, fits
    the model, and computes W along the direction (1, -alpha0/beta0),
    which is orthogonal to the truth; log W is compared to the exact
    log chi-square(1) law via the KS distance.  Replicates whose MLE does
    not exist are counted and excluded.
    """
    model = ResponseModel.from_theta(theta0)
    direction = (1.0, -theta0.alpha / theta0.beta)
    sample: list[float] = []
    undefined = 0
    for i in range(S):
        rng = replicate_rng(master_seed, i)
        state = up_down_start(UpDownConfig(x1=x1, d=d))
        for _ in range(n):
            w = math.log(state.next_stimulus)
            y = 1 if rng.random() < model.level_prob(w) else 0
            state = up_down_next(state, y)
        try:
            fit = fit_probit_levels(_working_levels(state.history))
        except UndefinedMleError:
            undefined += 1
            continue
        w_stat = w_statistic(fit, direction)
        sample.append(math.log(max(w_stat, 1e-300)))
    return LogWStudy(
        sample=tuple(sample),
        undefined_count=undefined,
        ks_distance=ks_distance(sample, log_chi2_1_cdf),
        S=S, n=n, x1=x1, d=d, master_seed=master_seed,
    )


# ---------------------------------------------------------------------------
# result export


_CSV_COLUMNS = [
    "label", "family", "location", "scale", "shape", "design", "estimator",
    "p", "n", "S", "level", "master_seed", "mse", "mse_natural",
    "mean_ci_width", "coverage", "undefined_count", "unbounded_count",
    "mean_trials", "classification_rate",
]


def _sig6(value: float | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.6g}"


def _row_to_dict(row: MetricsRow) -> dict:
    cfg = row.config
    return {
        "config": {
            "model": model_to_dict(cfg.model),
            "design": design_to_dict(cfg.design),
            "estimator": cfg.estimator,
            "p": cfg.p,
            "n": cfg.n,
            "S": cfg.S,
            "level": cfg.level,
            "master_seed": cfg.master_seed,
            "randomize_start": cfg.randomize_start,
            "shrink": cfg.shrink,
            "label": cfg.label,
        },
        "mse": row.mse,
        "mse_natural": row.mse_natural,
        "mean_ci_width": row.mean_ci_width,
        "coverage": row.coverage,
        "undefined_count": row.undefined_count,
        "unbounded_count": row.unbounded_count,
        "mean_trials": row.mean_trials,
        "classification_rate": row.classification_rate,
    }


def _row_from_dict(data: dict) -> MetricsRow:
    cfg = data["config"]
    config = StudyConfig(
        model=model_from_dict(cfg["model"]),
        design=design_from_dict(cfg["design"]),
        estimator=cfg["estimator"],
        p=cfg["p"], n=cfg["n"], S=cfg["S"], level=cfg["level"],
        master_seed=cfg["master_seed"],
        randomize_start=cfg.get("randomize_start", False),
        shrink=cfg.get("shrink", True),
        label=cfg.get("label", ""),
    )
    return MetricsRow(
        config=config,
        mse=data["mse"],
        mse_natural=data["mse_natural"],
        mean_ci_width=data["mean_ci_width"],
        coverage=data["coverage"],
        undefined_count=data["undefined_count"],
        unbounded_count=data["unbounded_count"],
        mean_trials=data["mean_trials"],
        classification_rate=data.get("classification_rate"),
    )


def export_results(rows: Sequence[MetricsRow], destination: str,
                   format: str = "delimited-text") -> None:
    """Write study rows either as plot-ready delimited text (floats at six
    significant digits) or as structured text that round-trips exactly
    through :func:`read_results`."""
    if not rows:
        raise ConfigError("no rows to export")
    if not destination:
        raise ConfigError("empty destination path")
    if format == "structured-text":
        payload = [_row_to_dict(r) for r in rows]
        with open(destination, "w") as fh:
            json.dump(payload, fh, indent=2, allow_nan=True)
            fh.write("\n")
        return
    if format != "delimited-text":
        raise ConfigError(f"unknown export format {format!r}")
    with open(destination, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for row in rows:
            cfg = row.config
            writer.writerow([
                cfg.label,
                cfg.model.family,
                _sig6(cfg.model.location),
                _sig6(cfg.model.scale),
                _sig6(cfg.model.shape),
                design_to_dict(cfg.design)["kind"],
                cfg.estimator,
                _sig6(cfg.p),
                cfg.n,
                cfg.S,
                _sig6(cfg.level),
                cfg.master_seed,
                _sig6(row.mse),
                _sig6(row.mse_natural),
                _sig6(row.mean_ci_width),
                _sig6(row.coverage),
                row.undefined_count,
                row.unbounded_count,
                _sig6(row.mean_trials),
                _sig6(row.classification_rate),
            ])


def read_results(path: str) -> list[MetricsRow]:
    """Read back a structured-text export."""
    with open(path) as fh:
        payload = json.load(fh)
    return [_row_from_dict(item) for item in payload]
