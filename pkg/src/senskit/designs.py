"""Sequential design engines.

Four families of adaptive procedures, all driven one binary outcome at a
time through immutable states:

* classic up-and-down (fixed multiplicative step on log-stimulus),
* biased coin design (BCD) targeting an arbitrary quantile,
* the Robbins-Monro-Joseph (RMJ) stochastic-approximation scheme with a
  precomputed gain/offset schedule,
* the UN limiting-stimulus staircase family (tests I1, I2, I3, F1, F2)
  as one configurable state machine on a fixed stimulus grid.

Advancing a state returns a new state; histories are tuples of
TrialRecord.  All step arithmetic is done on log-stimulus except where a
design explicitly works on the physical scale (BCD with
``step_scale="natural"``, matching how apparatus-bound experiments step
in even load increments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .errors import ConfigError, DesignStateError, GridError
from .grids import SNAP_POLICIES, StimulusGrid, snap_to_grid
from .models import norm_cdf, norm_pdf, norm_quantile

__all__ = [
    "TrialRecord",
    "UpDownConfig",
    "UpDownState",
    "up_down_start",
    "up_down_next",
    "BcdConfig",
    "BcdState",
    "bcd_start",
    "bcd_next",
    "RmjSchedule",
    "rmj_build_schedule",
    "RmjConfig",
    "RmjState",
    "rmj_start",
    "rmj_next",
    "UN_PRESETS",
    "UnStaircaseConfig",
    "UnState",
    "un_start",
    "un_next",
    "un_result",
    "un_staircase_run",
    "LimitingStimulusResult",
    "classify",
    "advance_design",
    "replay_trials",
]


@dataclass(frozen=True, slots=True)
class TrialRecord:
    """One binary trial: (stimulus, outcome) plus bookkeeping."""

    index: int
    stimulus: float
    log_stimulus: float
    outcome: int
    grid_label: str | None = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("trial index is 1-based")
        if self.outcome not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {self.outcome}")
        if not self.stimulus > 0.0:
            raise ValueError(f"stimulus must be positive, got {self.stimulus}")
        if not math.isclose(self.log_stimulus, math.log(self.stimulus), abs_tol=1e-12):
            raise ValueError("log_stimulus does not match log(stimulus)")


def _record(history: tuple[TrialRecord, ...], stimulus: float, outcome: int,
            label: str | None = None) -> TrialRecord:
    return TrialRecord(
        index=len(history) + 1,
        stimulus=stimulus,
        log_stimulus=math.log(stimulus),
        outcome=int(outcome),
        grid_label=label,
    )


def _check_active(state) -> None:
    if state.terminated:
        raise DesignStateError("design already terminated; no further trials accepted")


# ---------------------------------------------------------------------------
# classic up-and-down


@dataclass(frozen=True, slots=True)
class UpDownConfig:
    x1: float
    d: float

    def __post_init__(self) -> None:
        if not self.x1 > 0.0:
            raise ConfigError(f"x1 must be positive, got {self.x1}")
        if not self.d > 0.0:
            raise ConfigError(f"step size d must be positive, got {self.d}")


@dataclass(frozen=True, slots=True)
class UpDownState:
    config: UpDownConfig
    history: tuple[TrialRecord, ...]
    level: float  # log-stimulus of the next trial
    terminated: bool = False

    @property
    def next_stimulus(self) -> float | None:
        return None if self.terminated else math.exp(self.level)


def up_down_start(config: UpDownConfig) -> UpDownState:
    return UpDownState(config=config, history=(), level=math.log(config.x1))


def up_down_next(state: UpDownState, y: int) -> UpDownState:
    """Record outcome y at the current level and step down (positive) or
    up (negative) by d on the log scale."""
    _check_active(state)
    rec = _record(state.history, math.exp(state.level), y)
    step = -state.config.d if rec.outcome == 1 else state.config.d
    return replace(state, history=state.history + (rec,), level=state.level + step)


# ---------------------------------------------------------------------------
# biased coin design


@dataclass(frozen=True, slots=True)
class BcdConfig:
    x1: float
    d: float
    p: float
    grid: StimulusGrid | None = None
    snap_policy: str = "nearest"
    step_scale: str = "log"

    def __post_init__(self) -> None:
        if not self.x1 > 0.0:
            raise ConfigError(f"x1 must be positive, got {self.x1}")
        if not self.d > 0.0:
            raise ConfigError(f"step size d must be positive, got {self.d}")
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"target probability must be in (0, 1), got {self.p}")
        if self.snap_policy not in SNAP_POLICIES:
            raise ConfigError(f"unknown snap policy {self.snap_policy!r}")
        if self.step_scale not in ("log", "natural"):
            raise ConfigError("step_scale must be 'log' or 'natural'")

    @property
    def coin_prob(self) -> float:
        """Probability of moving on the randomised branch: p/(1-p) for
        p <= 1/2, (1-p)/p for p > 1/2.  Equals 1 at p = 1/2, where the
        design degenerates to plain up-and-down."""
        odds = self.p / (1.0 - self.p)
        return min(odds, 1.0 / odds)


@dataclass(frozen=True, slots=True)
class BcdState:
    config: BcdConfig
    history: tuple[TrialRecord, ...]
    nominal: float  # un-snapped ladder position, natural units
    coins: tuple[float | None, ...] = ()
    terminated: bool = False

    @property
    def next_stimulus(self) -> float | None:
        if self.terminated:
            return None
        if self.config.grid is not None:
            return snap_to_grid(self.nominal, self.config.grid, self.config.snap_policy)
        return self.nominal


def bcd_start(config: BcdConfig) -> BcdState:
    return BcdState(config=config, history=(), nominal=config.x1)


def bcd_next(state: BcdState, y: int, rng=None, coin: float | None = None,
             stimulus: float | None = None) -> BcdState:
    """Advance a biased coin design by one outcome.

    For target p <= 1/2 a positive response always steps down; a negative
    response steps up with probability p/(1-p) (coin lands heads) and
    stays put otherwise.  For p > 1/2 the rule is mirrored.  The coin is
    drawn from ``rng`` unless an explicit uniform draw is supplied (used
    when replaying a recorded session).  With p = 0.5 no coin is consumed
    and the walk is exactly the classic up-and-down.

    The walk itself lives on an exact ladder (``nominal``); when a grid is
    configured only the physical recommendation is snapped, so one
    unavailable load does not derail the ladder (an apparatus offering
    96 N instead of a nominal 88 N still steps back down to 80 N).  An
    explicit ``stimulus`` records an off-recommendation load the operator
    actually applied, again without moving the ladder off course.
    """
    _check_active(state)
    cfg = state.config
    y = int(y)
    if y not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {y}")

    moves_on_coin = (y == 0) if cfg.p <= 0.5 else (y == 1)
    if not moves_on_coin:
        direction = -1 if y == 1 else 1
        u = None
    else:
        prob = cfg.coin_prob
        if prob >= 1.0:
            u = None
            move = True
        else:
            if coin is not None:
                u = float(coin)
            elif rng is not None:
                u = float(rng.random())
            else:
                raise DesignStateError("coin flip required: provide rng or an explicit coin")
            move = u < prob
        direction = 0 if not move else (1 if y == 0 else -1)

    applied = state.next_stimulus if stimulus is None else float(stimulus)
    label = None
    if cfg.grid is not None:
        try:
            label = cfg.grid.label_at(cfg.grid.index_of(applied))
        except GridError:
            label = None  # off-grid override: record the raw load
    rec = _record(state.history, applied, y, label)

    nominal = state.nominal
    if direction != 0:
        if cfg.step_scale == "log":
            nominal = nominal * math.exp(direction * cfg.d)
        else:
            proposed = nominal + direction * cfg.d
            # physical floor: never walk the ladder to a non-positive load
            nominal = proposed if proposed > 0.0 else nominal
    return replace(
        state,
        history=state.history + (rec,),
        nominal=nominal,
        coins=state.coins + (u,),
    )


# ---------------------------------------------------------------------------
# Robbins-Monro-Joseph


@dataclass(frozen=True, slots=True)
class RmjSchedule:
    """Precomputed gain/offset schedule for the RMJ recursion
    log x_{i+1} = log x_i - a_i (y_i - b_i).

    Derived from the normal-approximation Bayesian updating scheme: with
    root uncertainty tau_i and probit slope gamma = beta_approx/phi(nu),
    nu = Phi^{-1}(p),

        c_i^2   = 1 + gamma^2 tau_i^2
        b_i     = Phi(nu / c_i)
        a_i     = gamma tau_i^2 phi(nu/c_i) / (c_i b_i (1 - b_i))
        tau_{i+1}^2 = tau_i^2 (1 - gamma^2 tau_i^2 phi(nu/c_i)^2
                               / (c_i^2 b_i (1 - b_i)))

    so b_i shrinks from Phi(nu/c_1) toward p and the gains decay like 1/i,
    giving divergent sum(a) with convergent sum(a^2).  ``tau`` holds
    tau_1 ... tau_{n+1}; tau_{n+1} doubles as the posterior spread of the
    final point x_{n+1} and drives its confidence interval.
    """

    p: float
    tau1: float
    beta_approx: float
    gain: tuple[float, ...]
    offset: tuple[float, ...]
    tau: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.gain)


def rmj_build_schedule(p: float, tau1: float = 1.0, beta_approx: float | None = None,
                       n: int = 30) -> RmjSchedule:
    """Build the (a_i, b_i) schedule for n steps.

    ``beta_approx`` is the proxy for the slope of the response curve at the
    target quantile; by default phi(Phi^{-1}(p)), i.e. the slope a standard
    normal response curve would have there (no oracle knowledge of the
    true curve is assumed).
    """
    if not 0.0 < p < 1.0:
        raise ConfigError(f"target probability must be in (0, 1), got {p}")
    if not tau1 > 0.0:
        raise ConfigError(f"tau1 must be positive, got {tau1}")
    if n < 1:
        raise ConfigError(f"schedule length must be >= 1, got {n}")
    nu = norm_quantile(p)
    if beta_approx is None:
        beta_approx = norm_pdf(nu)
    if not beta_approx > 0.0:
        raise ConfigError(f"beta_approx must be positive, got {beta_approx}")

    gamma = beta_approx / norm_pdf(nu)
    gains: list[float] = []
    offsets: list[float] = []
    taus: list[float] = [tau1]
    tau_sq = tau1 * tau1
    for _ in range(n):
        c_sq = 1.0 + gamma * gamma * tau_sq
        c = math.sqrt(c_sq)
        u = nu / c
        b = norm_cdf(u)
        pdf_u = norm_pdf(u)
        spread = b * (1.0 - b)
        a = gamma * tau_sq * pdf_u / (c * spread)
        gains.append(a)
        offsets.append(b)
        shrink = 1.0 - gamma * gamma * tau_sq * pdf_u * pdf_u / (c_sq * spread)
        tau_sq = tau_sq * shrink
        taus.append(math.sqrt(tau_sq))
    return RmjSchedule(
        p=p, tau1=tau1, beta_approx=beta_approx,
        gain=tuple(gains), offset=tuple(offsets), tau=tuple(taus),
    )


@dataclass(frozen=True, slots=True)
class RmjConfig:
    p: float
    n: int
    x1: float
    tau1: float = 1.0
    beta_approx: float | None = None

    def __post_init__(self) -> None:
        if not self.x1 > 0.0:
            raise ConfigError(f"x1 must be positive, got {self.x1}")
        if self.n < 1:
            raise ConfigError(f"run length must be >= 1, got {self.n}")


@dataclass(frozen=True, slots=True)
class RmjState:
    config: RmjConfig
    schedule: RmjSchedule
    history: tuple[TrialRecord, ...]
    level: float  # current log-stimulus; after n outcomes this is log x_{n+1}

    @property
    def step(self) -> int:
        return len(self.history)

    @property
    def terminated(self) -> bool:
        return self.step >= self.schedule.n

    @property
    def next_stimulus(self) -> float | None:
        return None if self.terminated else math.exp(self.level)

    @property
    def final_level(self) -> float:
        """log x_{n+1}, the point estimate carried by a completed run."""
        if not self.terminated:
            raise DesignStateError("run not complete; no final estimate yet")
        return self.level


def rmj_start(config: RmjConfig, schedule: RmjSchedule | None = None) -> RmjState:
    if schedule is None:
        schedule = rmj_build_schedule(config.p, config.tau1, config.beta_approx, config.n)
    if schedule.n != config.n:
        raise ConfigError(f"schedule length {schedule.n} does not match run length {config.n}")
    return RmjState(config=config, schedule=schedule, history=(), level=math.log(config.x1))


def rmj_next(state: RmjState, y: int) -> RmjState:
    _check_active(state)
    i = state.step
    rec = _record(state.history, math.exp(state.level), y)
    a = state.schedule.gain[i]
    b = state.schedule.offset[i]
    return replace(
        state,
        history=state.history + (rec,),
        level=state.level - a * (rec.outcome - b),
    )


# ---------------------------------------------------------------------------
# UN limiting-stimulus staircases


# name -> (K, limiting_type, initial_stage, start); None means the test
# leaves the field undefined and the caller must choose explicitly.
UN_PRESETS: dict[str, tuple[int, str, bool | None, str | None]] = {
    "I1": (6, "I", True, "mid-range"),
    "I2": (3, "II", False, "grid-max"),
    "I3": (25, "II", True, "mid-range"),
    "F1": (6, "I", False, "grid-max"),
    "F2": (25, "II", None, None),
}


@dataclass(frozen=True)
class UnStaircaseConfig:
    """Configuration of a K-consecutive-negatives staircase.

    ``limiting_type`` selects what the run reports: type I is the smallest
    tested stimulus with at least one positive response (the penultimate
    level), type II the level at which the K negatives terminated the run.
    ``start`` is "grid-max", "mid-range" (nearest level to the log-scale
    middle of the grid) or an explicit grid member.
    """

    grid: StimulusGrid
    k_negatives: int
    limiting_type: str
    initial_stage: bool
    start: float | str = "grid-max"

    def __post_init__(self) -> None:
        if self.k_negatives < 1:
            raise ConfigError(f"K must be >= 1, got {self.k_negatives}")
        if self.limiting_type not in ("I", "II"):
            raise ConfigError("limiting_type must be 'I' or 'II'")
        if isinstance(self.start, str):
            if self.start not in ("grid-max", "mid-range"):
                raise ConfigError(f"unknown start spec {self.start!r}")
        else:
            self.grid.index_of(float(self.start))  # must be a grid member

    @classmethod
    def from_preset(cls, name: str, grid: StimulusGrid,
                    initial_stage: bool | None = None,
                    start: float | str | None = None,
                    k_negatives: int | None = None,
                    limiting_type: str | None = None) -> "UnStaircaseConfig":
        key = name.upper()
        if key not in UN_PRESETS:
            raise ConfigError(f"unknown staircase preset {name!r}; choose from {sorted(UN_PRESETS)}")
        k, ltype, preset_initial, preset_start = UN_PRESETS[key]
        if initial_stage is None:
            initial_stage = preset_initial
        if start is None:
            start = preset_start
        if initial_stage is None or start is None:
            # F2 leaves both undefined; refusing a silent default is the point.
            raise ConfigError(
                f"preset {key} does not define its initial stage/start; "
                "pass initial_stage and start explicitly"
            )
        return cls(
            grid=grid,
            k_negatives=k if k_negatives is None else k_negatives,
            limiting_type=ltype if limiting_type is None else limiting_type,
            initial_stage=initial_stage,
            start=start,
        )

    def start_index(self) -> int:
        if self.start == "grid-max":
            return len(self.grid) - 1
        if self.start == "mid-range":
            return self.grid.midrange_index()
        return self.grid.index_of(float(self.start))


@dataclass(frozen=True)
class UnState:
    config: UnStaircaseConfig
    history: tuple[TrialRecord, ...]
    level_index: int
    consec_neg: int = 0
    escalating: bool = False  # inside the initial stage, before the first positive
    min_pos_index: int | None = None
    terminated: bool = False
    floor_hit: bool = False
    terminal_index: int | None = None

    @property
    def next_stimulus(self) -> float | None:
        return None if self.terminated else self.config.grid.values[self.level_index]

    def provisional_values(self) -> dict[str, float | None]:
        """Would-be limiting stimuli if the run ended now, both readings."""
        grid = self.config.grid
        type1 = None if self.min_pos_index is None else grid.values[self.min_pos_index]
        idx = self.terminal_index if self.terminated else self.level_index
        return {"I": type1, "II": grid.values[idx]}


@dataclass(frozen=True)
class LimitingStimulusResult:
    value: float | None
    limiting_type: str
    trials: tuple[TrialRecord, ...]
    floor_hit: bool = False
    classification: str | None = None


def un_start(config: UnStaircaseConfig) -> UnState:
    return UnState(
        config=config,
        history=(),
        level_index=config.start_index(),
        escalating=config.initial_stage,
    )


def un_next(state: UnState, y: int) -> UnState:
    """Advance the staircase by one outcome.

    At a level, trials repeat until a positive sends the run one grid step
    down (terminating with a floor-hit flag if already at the minimum) or
    K consecutive negatives end the run.  During the initial stage each
    negative escalates one step instead (sticking at the grid maximum,
    where the K-rule still applies); the first positive switches to the
    normal descent.
    """
    _check_active(state)
    y = int(y)
    if y not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {y}")
    grid = state.config.grid
    idx = state.level_index
    rec = _record(state.history, grid.values[idx], y, grid.label_at(idx))
    history = state.history + (rec,)

    if y == 1:
        min_pos = idx if state.min_pos_index is None else min(idx, state.min_pos_index)
        if idx == 0:
            # cannot descend below the grid: stop and flag it
            return replace(state, history=history, min_pos_index=min_pos,
                           terminated=True, floor_hit=True, terminal_index=0,
                           escalating=False, consec_neg=0)
        return replace(state, history=history, min_pos_index=min_pos,
                       level_index=idx - 1, consec_neg=0, escalating=False)

    # negative response
    if state.escalating and idx < len(grid) - 1:
        return replace(state, history=history, level_index=idx + 1, consec_neg=0)
    consec = state.consec_neg + 1
    if consec >= state.config.k_negatives:
        return replace(state, history=history, consec_neg=consec,
                       terminated=True, terminal_index=idx, escalating=False)
    return replace(state, history=history, consec_neg=consec)


def un_result(state: UnState) -> LimitingStimulusResult:
    if not state.terminated:
        raise DesignStateError("staircase still running; no limiting stimulus yet")
    grid = state.config.grid
    if state.config.limiting_type == "I":
        value = None if state.min_pos_index is None else grid.values[state.min_pos_index]
    else:
        value = grid.values[state.terminal_index]
    return LimitingStimulusResult(
        value=value,
        limiting_type=state.config.limiting_type,
        trials=state.history,
        floor_hit=state.floor_hit,
    )


def un_staircase_run(config: UnStaircaseConfig,
                     responder: Callable[[float], int],
                     max_trials: int = 100_000) -> LimitingStimulusResult:
    """Run a staircase to termination against an outcome source."""
    state = un_start(config)
    for _ in range(max_trials):
        state = un_next(state, responder(state.next_stimulus))
        if state.terminated:
            return un_result(state)
    raise DesignStateError(f"staircase did not terminate within {max_trials} trials")


def classify(value: float | None, threshold: float) -> str:
    """Sensitive iff the limiting stimulus is strictly below the threshold.
    A run with no positive response (value None) cannot demonstrate
    sensitivity and falls on the insensitive side."""
    if value is None:
        return "insensitive"
    return "sensitive" if value < threshold else "insensitive"


# ---------------------------------------------------------------------------
# shared plumbing


def advance_design(state, y: int, rng=None, coin: float | None = None):
    """Dispatch to the right advance function for a state value."""
    if isinstance(state, UpDownState):
        return up_down_next(state, y)
    if isinstance(state, BcdState):
        return bcd_next(state, y, rng=rng, coin=coin)
    if isinstance(state, RmjState):
        return rmj_next(state, y)
    if isinstance(state, UnState):
        return un_next(state, y)
    raise TypeError(f"not a design state: {type(state).__name__}")


def replay_trials(state, trials: Sequence, rel_tol: float = 1e-9,
                  coins: Sequence[float | None] | None = None):
    """Drive a design with recorded (stimulus, outcome) pairs, checking at
    each step that the recorded stimulus is the one the procedure would
    have recommended.  Raises naming the offending trial on mismatch."""
    for i, trial in enumerate(trials):
        if hasattr(trial, "stimulus"):
            stimulus, outcome = trial.stimulus, trial.outcome
        else:
            stimulus, outcome = trial
        if state.terminated:
            raise DesignStateError(
                f"trial {i + 1}: procedure already terminated before this trial"
            )
        expected = state.next_stimulus
        if not math.isclose(stimulus, expected, rel_tol=rel_tol):
            raise DesignStateError(
                f"trial {i + 1}: recorded stimulus {stimulus} does not match "
                f"the procedure's recommendation {expected}"
            )
        coin = coins[i] if coins is not None else None
        state = advance_design(state, outcome, coin=coin)
    return state
