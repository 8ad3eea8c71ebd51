"""JSON-friendly converters for models, grids, and design configs.

Used by the study-config files, result exports, and the session service's
event logs, so that every persisted artifact can be read back into the
exact objects that produced it.
"""

from __future__ import annotations

from typing import Any

from .designs import BcdConfig, RmjConfig, UnStaircaseConfig, UpDownConfig
from .errors import ConfigError
from .grids import StimulusGrid, builtin_grid, builtin_grid_names
from .models import ResponseModel

__all__ = [
    "design_from_dict",
    "design_to_dict",
    "grid_from_spec",
    "grid_to_spec",
    "model_from_dict",
    "model_to_dict",
]

DesignConfig = UpDownConfig | BcdConfig | RmjConfig | UnStaircaseConfig


def model_to_dict(model: ResponseModel) -> dict[str, Any]:
    out: dict[str, Any] = {
        "family": model.family,
        "location": model.location,
        "scale": model.scale,
    }
    if model.shape is not None:
        out["shape"] = model.shape
    return out


def model_from_dict(spec: dict[str, Any]) -> ResponseModel:
    try:
        return ResponseModel(
            family=spec["family"],
            location=float(spec.get("location", 0.0)),
            scale=float(spec.get("scale", 1.0)),
            shape=(float(spec["shape"]) if spec.get("shape") is not None else None),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model spec {spec!r}: {exc}") from exc


def grid_to_spec(grid: StimulusGrid) -> Any:
    """A builtin grid round-trips by name, anything else by value."""
    if grid.name in builtin_grid_names() and builtin_grid(grid.name) == grid:
        return grid.name
    return {
        "name": grid.name,
        "unit": grid.unit,
        "values": list(grid.values),
        "labels": list(grid.labels) if grid.labels is not None else None,
    }


def grid_from_spec(spec: Any) -> StimulusGrid:
    if isinstance(spec, str):
        return builtin_grid(spec)
    try:
        return StimulusGrid(
            values=tuple(float(v) for v in spec["values"]),
            unit=spec.get("unit", "N"),
            name=spec.get("name", "custom"),
            labels=(tuple(spec["labels"]) if spec.get("labels") is not None else None),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid spec {spec!r}: {exc}") from exc


def design_to_dict(design: DesignConfig) -> dict[str, Any]:
    if isinstance(design, UpDownConfig):
        return {"kind": "up-down", "x1": design.x1, "d": design.d}
    if isinstance(design, BcdConfig):
        return {
            "kind": "bcd",
            "x1": design.x1,
            "d": design.d,
            "p": design.p,
            "grid": grid_to_spec(design.grid) if design.grid is not None else None,
            "snap_policy": design.snap_policy,
            "step_scale": design.step_scale,
        }
    if isinstance(design, RmjConfig):
        return {
            "kind": "rmj",
            "p": design.p,
            "n": design.n,
            "x1": design.x1,
            "tau1": design.tau1,
            "beta_approx": design.beta_approx,
        }
    if isinstance(design, UnStaircaseConfig):
        return {
            "kind": "un-staircase",
            "grid": grid_to_spec(design.grid),
            "k_negatives": design.k_negatives,
            "limiting_type": design.limiting_type,
            "initial_stage": design.initial_stage,
            "start": design.start,
        }
    raise ConfigError(f"not a design config: {type(design).__name__}")


def design_from_dict(spec: dict[str, Any]) -> DesignConfig:
    try:
        kind = spec["kind"]
        if kind == "up-down":
            return UpDownConfig(x1=float(spec["x1"]), d=float(spec["d"]))
        if kind == "bcd":
            return BcdConfig(
                x1=float(spec["x1"]),
                d=float(spec["d"]),
                p=float(spec["p"]),
                grid=(grid_from_spec(spec["grid"]) if spec.get("grid") is not None else None),
                snap_policy=spec.get("snap_policy", "nearest"),
                step_scale=spec.get("step_scale", "log"),
            )
        if kind == "rmj":
            beta_approx = spec.get("beta_approx")
            return RmjConfig(
                p=float(spec["p"]),
                n=int(spec["n"]),
                x1=float(spec["x1"]),
                tau1=float(spec.get("tau1", 1.0)),
                beta_approx=(float(beta_approx) if beta_approx is not None else None),
            )
        if kind == "un-staircase":
            grid = grid_from_spec(spec["grid"])
            start = spec.get("start")
            if isinstance(start, (int, float)):
                start = float(start)
            if "preset" in spec:
                return UnStaircaseConfig.from_preset(
                    spec["preset"],
                    grid,
                    initial_stage=spec.get("initial_stage"),
                    start=start,
                    k_negatives=(int(spec["k_negatives"]) if "k_negatives" in spec else None),
                    limiting_type=spec.get("limiting_type"),
                )
            return UnStaircaseConfig(
                grid=grid,
                k_negatives=int(spec["k_negatives"]),
                limiting_type=spec["limiting_type"],
                initial_stage=bool(spec["initial_stage"]),
                start=start,
            )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad design spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown design kind {spec.get('kind')!r}")
