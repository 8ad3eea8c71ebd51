"""Command-line entry point: studies, replays, offline estimation, service.

Exit codes: 0 success; 2 usage or configuration error; 3 statistical
failure (an undefined estimate, an out-of-range inversion, failed study
cells).  The split lets scripts tell a user mistake from data pathology.
"""

import functools
import json
import math
import sys
from importlib import resources
from pathlib import Path

import click

from .data import PETN_THETA, fixture_dataset, fixture_names, read_dataset
from .designs import UnStaircaseConfig, classify, replay_trials, un_result, un_start
from .errors import ConfigError, EstimationError, OutOfRangeError, SenskitError
from .estimators import (
    cir,
    cir_quantile,
    dataset_levels,
    fieller_interval,
    fit_probit_levels,
)
from .grids import builtin_grid, builtin_grid_names
from .models import ProbitTheta, ResponseModel
from .serialize import model_from_dict
from .service import (
    BIND_ENV,
    DATA_DIR_ENV,
    DEFAULT_BIND,
    DEFAULT_DATA_DIR,
    SessionStore,
    run_server,
    session_snapshot,
)
from .simulate import (
    DEFAULT_P_VALUES,
    DEFAULT_STUDY_MODELS,
    METHODS,
    export_results,
    log_chi2_1_cdf,
    logw_study,
    run_study,
    study_cell,
    un_grid_comparison,
)

EXIT_CONFIG = 2
EXIT_STATISTICAL = 3

_PACKAGED_CONFIGS = ("fig4.study",)
_STANDARD_MODELS = {m.family: m for m in DEFAULT_STUDY_MODELS}

_PROB = click.FloatRange(0.0, 1.0, min_open=True, max_open=True)
_POSITIVE = click.FloatRange(min=0.0, min_open=True)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _mapped_errors(fn):
    """Translate package failures into the exit-code contract."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OutOfRangeError as exc:
            extra = ""
            if exc.span is not None:
                extra = f" (fitted range {exc.span[0]:.6g} .. {exc.span[1]:.6g})"
            _fail(EXIT_STATISTICAL, f"{exc}{extra}")
        except EstimationError as exc:
            _fail(EXIT_STATISTICAL, str(exc))
        except SenskitError as exc:
            _fail(EXIT_CONFIG, str(exc))
    return wrapper


@click.group()
def main():
    """Sequential sensitivity testing: simulation studies, dataset replays,
    offline estimation, and the bench session service."""


# ---------------------------------------------------------------------------
# shared helpers


def _load_dataset(ref: str):
    if ref in fixture_names():
        return fixture_dataset(ref)
    path = Path(ref)
    if not path.exists():
        raise ConfigError(
            f"no dataset {ref!r}: not a fixture alias "
            f"({', '.join(fixture_names())}) nor a readable file"
        )
    return read_dataset(path)


def _estimate_dataset(dataset, estimator: str, p: float, level: float,
                      shrink_target):
    if estimator == "mle-fieller":
        fit = fit_probit_levels(dataset_levels(dataset))
        est = fieller_interval(fit, p, level=level).exp()
        detail = (f"probit fit on log-stimulus: intercept {fit.alpha:.5g}, "
                  f"slope {fit.beta:.5g} ({fit.iterations} iterations)")
        return est, detail
    fit = cir(dataset, shrink_target=shrink_target)
    lo, hi = fit.rate_span
    est = cir_quantile(fit, p, level=level)
    shrink_note = "no shrink" if shrink_target is None else f"shrink target {shrink_target:g}"
    detail = f"centred isotonic fit spanning rates {lo:.4g} .. {hi:.4g} ({shrink_note})"
    return est, detail


def _bound_text(value: float) -> str:
    return "unbounded" if not math.isfinite(value) else f"{value:.6g}"


def _estimate_text(est, unit: str) -> str:
    lines = [
        f"method: {est.method}",
        f"p: {est.p:g}  level: {est.level:g}",
        f"point: {est.point:.6g} {unit}",
    ]
    if est.kind == "whole-line":
        lines.append(f"set: all loads ({unit}); the data carry no information at this level")
    elif est.kind == "two-rays":
        lines.append(
            f"set: (0, {est.lo:.6g}] and [{est.hi:.6g}, inf) {unit}; "
            "slope not distinguishable from zero at this level"
        )
    else:
        lines.append(f"interval: [{_bound_text(est.lo)}, {_bound_text(est.hi)}] {unit}")
    return "\n".join(lines)


def _json_bound(value: float):
    return value if math.isfinite(value) else None


def _estimate_json(est, unit: str) -> dict:
    return {
        "p": est.p,
        "point": est.point,
        "lo": _json_bound(est.lo),
        "hi": _json_bound(est.hi),
        "level": est.level,
        "method": est.method,
        "kind": est.kind,
        "unit": unit,
    }


def _store_from(data_dir, seed) -> SessionStore:
    env_store = SessionStore.from_env()
    if data_dir is None and seed is None:
        return env_store
    return SessionStore(
        data_dir if data_dir is not None else env_store.root,
        master_seed=seed if seed is not None else env_store.master_seed,
    )


# ---------------------------------------------------------------------------
# estimate / replay


@main.command()
@click.argument("dataset")
@click.option("--estimator", type=click.Choice(["mle-fieller", "cir"]),
              default="mle-fieller", show_default=True,
              help="Estimation pipeline to run over the dataset.")
@click.option("--p", type=_PROB, default=0.5, show_default=True,
              help="Target response probability.")
@click.option("--level", type=_PROB, default=0.9, show_default=True,
              help="Confidence level.")
@click.option("--shrink-target", type=_PROB, default=None,
              help="CIR rate shrink target [default: p, the adaptive-data recipe].")
@click.option("--no-shrink", is_flag=True, help="Fit CIR on raw rates.")
@click.option("--output", type=click.Choice(["text", "structured"]),
              default="text", show_default=True)
@_mapped_errors
def estimate(dataset, estimator, p, level, shrink_target, no_shrink, output):
    """Estimate a dose quantile with a confidence set from recorded trials.

    DATASET is a fixture alias or a CSV file in the dataset format.
    """
    ds = _load_dataset(dataset)
    shrink = None if no_shrink else (shrink_target if shrink_target is not None else p)
    est, detail = _estimate_dataset(ds, estimator, p, level,
                                    shrink if estimator == "cir" else None)
    if output == "structured":
        click.echo(json.dumps(_estimate_json(est, ds.unit)))
    else:
        click.echo(_estimate_text(est, ds.unit))
        click.echo(detail)


@main.command()
@click.argument("dataset")
@click.option("--procedure", default=None,
              help="Staircase preset to replay through (e.g. f1).")
@click.option("--grid", "grid_name", default=None,
              help="Stimulus grid for a procedure replay "
                   f"({', '.join(builtin_grid_names())}).")
@click.option("--threshold", type=_POSITIVE, default=80.0, show_default=True,
              help="Sensitivity threshold in the dataset's unit.")
@click.option("--estimator", type=click.Choice(["mle-fieller", "cir"]),
              default=None,
              help="Estimate from the trials instead of replaying a procedure.")
@click.option("--p", type=_PROB, default=0.1, show_default=True,
              help="Target response probability (estimator mode).")
@click.option("--level", type=_PROB, default=0.9, show_default=True,
              help="Confidence level (estimator mode).")
@click.option("--shrink-target", type=_PROB, default=None,
              help="CIR rate shrink target [default: p].")
@click.option("--no-shrink", is_flag=True, help="Fit CIR on raw rates.")
@click.option("--output", type=click.Choice(["text", "structured"]),
              default="text", show_default=True)
@_mapped_errors
def replay(dataset, procedure, grid_name, threshold, estimator, p, level,
           shrink_target, no_shrink, output):
    """Replay recorded outcomes through a procedure or an estimator.

    Procedure mode checks every trial against the staircase
    recommendation and reports the limiting stimulus with its
    classification at --threshold.  Estimator mode fits the recorded
    trials and reports the dose-quantile estimate.
    """
    ds = _load_dataset(dataset)
    if (procedure is None) == (estimator is None):
        raise click.UsageError("choose exactly one of --procedure or --estimator")

    if estimator is not None:
        shrink = None if no_shrink else (shrink_target if shrink_target is not None else p)
        est, detail = _estimate_dataset(ds, estimator, p, level,
                                        shrink if estimator == "cir" else None)
        if output == "structured":
            click.echo(json.dumps(_estimate_json(est, ds.unit)))
        else:
            click.echo(_estimate_text(est, ds.unit))
            click.echo(detail)
        return

    if grid_name is None:
        raise click.UsageError("--grid is required with --procedure")
    grid = builtin_grid(grid_name)
    config = UnStaircaseConfig.from_preset(procedure, grid)
    state = replay_trials(un_start(config), ds.trials)
    result = un_result(state)
    label = classify(result.value, threshold)
    if output == "structured":
        click.echo(json.dumps({
            "procedure": procedure,
            "grid": grid.name,
            "trials": len(result.trials),
            "limiting_type": result.limiting_type,
            "value": result.value,
            "unit": ds.unit,
            "floor_hit": result.floor_hit,
            "threshold": threshold,
            "classification": label,
        }))
    else:
        text = ("none (no positive response)" if result.value is None
                else f"{result.value:g} {ds.unit}")
        click.echo(f"procedure {procedure} on grid {grid.name}: "
                   f"{len(result.trials)} trials replayed")
        click.echo(f"limiting stimulus (type {result.limiting_type}): {text}")
        click.echo(f"classification at {threshold:g} {ds.unit}: {label}")


# ---------------------------------------------------------------------------
# simulate


def _load_study_config(ref: str) -> dict:
    if ref in _PACKAGED_CONFIGS:
        text = resources.files("senskit.fixtures").joinpath(ref).read_text()
    else:
        path = Path(ref)
        if not path.exists():
            raise ConfigError(
                f"no study config {ref!r}: not a shipped config "
                f"({', '.join(_PACKAGED_CONFIGS)}) nor a readable file"
            )
        text = path.read_text()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"study config {ref!r} is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError("study config must be a JSON object")
    return spec


def _study_model(spec) -> ResponseModel:
    if isinstance(spec, str):
        if spec == "petn":
            return ResponseModel.from_theta(PETN_THETA)
        model = _STANDARD_MODELS.get(spec)
        if model is None:
            raise ConfigError(
                f"unknown model shorthand {spec!r}; shorthands: petn, "
                f"{', '.join(_STANDARD_MODELS)}"
            )
        return model
    if isinstance(spec, dict):
        return model_from_dict(spec)
    raise ConfigError(f"bad model entry {spec!r}: expected a shorthand or an object")


@main.command()
@click.argument("config")
@click.option("--S", "s_override", type=click.IntRange(min=1), default=None,
              help="Override replicates per cell.")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--n", "n_override", type=click.IntRange(min=2), default=None,
              help="Override trials per replicate.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Results file [default: senskit-study.csv or .json].")
@click.option("--format", "fmt",
              type=click.Choice(["delimited-text", "structured-text"]),
              default="delimited-text", show_default=True)
@click.option("--audit-dir", type=click.Path(file_okay=False), default=None,
              help="Write per-replicate audit logs here, one file per cell.")
@_mapped_errors
def simulate(config, s_override, seed, n_override, out, fmt, audit_dir):
    """Run the design-comparison study described by CONFIG.

    CONFIG is a JSON study file or the name of a shipped one (fig4.study).
    Each cell prints one summary line; the full metric table goes to
    --out.
    """
    spec = _load_study_config(config)
    try:
        models = [_study_model(m) for m in spec.get("models", list(_STANDARD_MODELS))]
        p_values = [float(v) for v in spec.get("p_values", DEFAULT_P_VALUES)]
        methods = list(spec.get("methods", METHODS))
        n = int(n_override if n_override is not None else spec.get("n", 30))
        S = int(s_override if s_override is not None else spec.get("S", 10_000))
        level = float(spec.get("level", 0.9))
        master_seed = int(seed if seed is not None else spec.get("master_seed", 0))
        d = float(spec.get("d", 0.5))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad study config value: {exc}") from exc

    cells = [
        study_cell(model, p, method, n=n, S=S, level=level,
                   master_seed=master_seed, d=d)
        for model in models for p in p_values for method in methods
    ]
    if audit_dir is not None:
        Path(audit_dir).mkdir(parents=True, exist_ok=True)
    rows = []
    failures = []
    for cell in cells:
        audit_path = None
        if audit_dir is not None:
            audit_path = str(Path(audit_dir) / (cell.label.replace("/", "_") + ".csv"))
        try:
            row = run_study(cell, audit_path=audit_path)
        except SenskitError as exc:
            failures.append((cell.label, str(exc)))
            click.echo(f"{cell.label}: failed: {exc}", err=True)
            continue
        rows.append(row)
        click.echo(
            f"{cell.label}: mse={row.mse:.4g} coverage={row.coverage:.3f} "
            f"width={row.mean_ci_width:.4g} undefined={row.undefined_count} "
            f"unbounded={row.unbounded_count}"
        )
    if rows:
        destination = out
        if destination is None:
            destination = ("senskit-study.json" if fmt == "structured-text"
                           else "senskit-study.csv")
        export_results(rows, destination, format=fmt)
        click.echo(f"wrote {len(rows)} rows to {destination}")
    if failures:
        _fail(EXIT_STATISTICAL,
              f"{len(failures)} of {len(cells)} cells failed (see messages above)")


# ---------------------------------------------------------------------------
# compare-grids / logw


def _parse_start(value):
    if value is None or value in ("grid-max", "mid-range"):
        return value
    try:
        return float(value)
    except ValueError:
        raise ConfigError(
            f"start must be grid-max, mid-range, or a grid level, got {value!r}"
        ) from None


@main.command("compare-grids")
@click.option("--grid-a", required=True,
              help=f"First grid ({', '.join(builtin_grid_names())}).")
@click.option("--grid-b", required=True,
              help="Second grid, same choices.")
@click.option("--procedure", default=None,
              help="Staircase preset (e.g. f1) supplying K/type/start defaults.")
@click.option("--k", "k_negatives", type=click.IntRange(min=1), default=None,
              help="Consecutive negatives that end a run [default: 6].")
@click.option("--limiting-type", type=click.Choice(["I", "II"]), default=None,
              help="Which limiting stimulus the run reports [default: I].")
@click.option("--initial-stage/--no-initial-stage", default=None,
              help="Escalate until the first positive before descending.")
@click.option("--start", default=None,
              help="grid-max, mid-range, or a grid level [default: grid-max].")
@click.option("--threshold", type=_POSITIVE, default=80.0, show_default=True,
              help="Sensitivity threshold for the classification rate.")
@click.option("--alpha", type=float, default=PETN_THETA.alpha, show_default=True,
              help="Probit intercept of the simulated material (log-stimulus).")
@click.option("--beta", type=_POSITIVE, default=PETN_THETA.beta, show_default=True,
              help="Probit slope of the simulated material (log-stimulus).")
@click.option("--S", "s_count", type=click.IntRange(min=1), default=10_000,
              show_default=True, help="Monte Carlo runs per grid.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Choice(["text", "structured"]),
              default="text", show_default=True)
@_mapped_errors
def compare_grids(grid_a, grid_b, procedure, k_negatives, limiting_type,
                  initial_stage, start, threshold, alpha, beta, s_count, seed,
                  output):
    """Run one staircase procedure on two stimulus grids against the same
    simulated material and compare the outcome distributions."""
    ga = builtin_grid(grid_a)
    gb = builtin_grid(grid_b)
    start = _parse_start(start)
    if procedure is not None:
        proto = UnStaircaseConfig.from_preset(
            procedure, ga, initial_stage=initial_stage, start=start,
            k_negatives=k_negatives, limiting_type=limiting_type,
        )
    else:
        proto = UnStaircaseConfig(
            grid=ga,
            k_negatives=6 if k_negatives is None else k_negatives,
            limiting_type="I" if limiting_type is None else limiting_type,
            initial_stage=False if initial_stage is None else initial_stage,
            start="grid-max" if start is None else start,
        )
    model = ResponseModel.from_theta(ProbitTheta(alpha=alpha, beta=beta))
    summary_a, summary_b = un_grid_comparison(
        model, ga, gb, proto.k_negatives, proto.limiting_type, threshold,
        s_count, seed, initial_stage=proto.initial_stage, start=proto.start,
    )
    if output == "structured":
        payload = []
        for s in (summary_a, summary_b):
            payload.append({
                "grid": s.grid_name,
                "S": s.S,
                "threshold": s.threshold,
                "classification_rate": s.classification_rate,
                "mean_trials": s.mean_trials,
                "distribution": [[v, c] for v, c in s.distribution],
            })
        click.echo(json.dumps({"k": proto.k_negatives,
                               "limiting_type": proto.limiting_type,
                               "grids": payload}))
        return
    click.echo(f"staircase K={proto.k_negatives} type {proto.limiting_type}, "
               f"{s_count} runs per grid, threshold {threshold:g}")
    for s in (summary_a, summary_b):
        click.echo(f"  {s.grid_name}: sensitive {100 * s.classification_rate:.2f}%  "
                   f"mean trials {s.mean_trials:.2f}")
    click.echo(f"  difference (b - a): "
               f"{100 * (summary_b.classification_rate - summary_a.classification_rate):+.2f} pp sensitive, "
               f"{summary_b.mean_trials - summary_a.mean_trials:+.2f} trials")


@main.command()
@click.option("--x1", type=_POSITIVE, default=360.0, show_default=True,
              help="Starting stimulus of the simulated up-and-down runs.")
@click.option("--d", type=_POSITIVE, default=0.2, show_default=True,
              help="Log-scale step size.")
@click.option("--n", type=click.IntRange(min=2), default=100, show_default=True,
              help="Trials per run.")
@click.option("--S", "s_count", type=click.IntRange(min=1), default=10_000,
              show_default=True, help="Monte Carlo replicates.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--alpha", type=float, default=PETN_THETA.alpha, show_default=True,
              help="Probit intercept of the simulated material (log-stimulus).")
@click.option("--beta", type=_POSITIVE, default=PETN_THETA.beta, show_default=True,
              help="Probit slope of the simulated material (log-stimulus).")
@click.option("--output", type=click.Choice(["text", "structured"]),
              default="text", show_default=True)
@_mapped_errors
def logw(x1, d, n, s_count, seed, alpha, beta, output):
    """Check the sampling distribution of the studentised log-median
    statistic on simulated up-and-down data against its reference curve."""
    study = logw_study(ProbitTheta(alpha=alpha, beta=beta), x1=x1, d=d, n=n,
                       S=s_count, master_seed=seed)
    if output == "structured":
        click.echo(json.dumps({
            "S": study.S, "n": study.n, "x1": study.x1, "d": study.d,
            "seed": study.master_seed,
            "undefined": study.undefined_count,
            "undefined_fraction": study.undefined_fraction,
            "ks_distance": study.ks_distance,
        }))
        return
    click.echo(f"{study.S} replicates of {study.n} trials "
               f"(x1={study.x1:g}, d={study.d:g})")
    click.echo(f"undefined fits: {study.undefined_count} "
               f"({100 * study.undefined_fraction:.2f}%)")
    click.echo(f"KS distance to the reference cdf: {study.ks_distance:.4f}")


# ---------------------------------------------------------------------------
# service


@main.command()
@click.option("--bind", default=None,
              help=f"host:port [default: ${BIND_ENV} or {DEFAULT_BIND}].")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None,
              help=f"Event-log directory [default: ${DATA_DIR_ENV} or {DEFAULT_DATA_DIR}].")
@click.option("--seed", type=int, default=None,
              help="Master seed for per-session streams [default: env or random].")
@_mapped_errors
def serve(bind, data_dir, seed):
    """Start the bench session service (blocks until interrupted)."""
    run_server(_store_from(data_dir, seed), bind=bind)


@main.group()
def session():
    """Inspect recorded sessions directly from the event-log directory."""


@session.command("list")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None,
              help=f"Event-log directory [default: ${DATA_DIR_ENV} or {DEFAULT_DATA_DIR}].")
@_mapped_errors
def session_list(data_dir):
    """One line per recorded session."""
    store = _store_from(data_dir, None)
    ids = store.list_ids()
    if not ids:
        click.echo("no sessions")
        return
    for sid in ids:
        s = store.get(sid)
        status = "terminated" if s.terminated else "active"
        material = f"  {s.material}" if s.material else ""
        click.echo(f"{sid}  {s.kind:<13} {s.trials:>4} trials  {status}{material}")


@session.command("show")
@click.argument("sid")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None,
              help=f"Event-log directory [default: ${DATA_DIR_ENV} or {DEFAULT_DATA_DIR}].")
@_mapped_errors
def session_show(sid, data_dir):
    """Print the folded snapshot of one session as JSON."""
    store = _store_from(data_dir, None)
    click.echo(json.dumps(session_snapshot(store.get(sid)), indent=2))


@session.command("export")
@click.argument("sid")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None,
              help=f"Event-log directory [default: ${DATA_DIR_ENV} or {DEFAULT_DATA_DIR}].")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the dataset here instead of stdout.")
@_mapped_errors
def session_export(sid, data_dir, out):
    """Export one session's trials in the dataset format."""
    store = _store_from(data_dir, None)
    text = store.export_csv(sid)
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
