"""Tests for the JSON codecs used by study configs, exports, and event logs."""

import json

import pytest

from senskit.designs import BcdConfig, RmjConfig, UnStaircaseConfig, UpDownConfig
from senskit.errors import ConfigError
from senskit.grids import StimulusGrid, builtin_grid
from senskit.models import ResponseModel
from senskit.serialize import (
    design_from_dict,
    design_to_dict,
    grid_from_spec,
    grid_to_spec,
    model_from_dict,
    model_to_dict,
)

FAMILIES = ["normal", "uniform", "logistic", "extreme-value", "skewed-logistic", "cauchy"]


class TestModelCodec:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_round_trip(self, family):
        shape = 2.0 if family == "skewed-logistic" else None
        model = ResponseModel(family=family, location=4.4, scale=0.7, shape=shape)
        back = model_from_dict(model_to_dict(model))
        assert back == model

    def test_shape_omitted_when_unset(self):
        spec = model_to_dict(ResponseModel(family="normal", location=0.0, scale=1.0))
        assert "shape" not in spec

    def test_defaults_applied(self):
        model = model_from_dict({"family": "normal"})
        assert model.location == 0.0 and model.scale == 1.0

    def test_bad_specs(self):
        with pytest.raises(ConfigError, match="bad model spec"):
            model_from_dict({"location": 1.0})
        with pytest.raises(ConfigError, match="bad model spec"):
            model_from_dict({"family": "normal", "scale": "wide"})

    def test_json_serialisable(self):
        spec = model_to_dict(ResponseModel(family="cauchy", location=1.0, scale=2.0))
        assert json.loads(json.dumps(spec)) == spec


class TestGridCodec:
    def test_builtin_round_trips_by_name(self):
        grid = builtin_grid("notch-6")
        spec = grid_to_spec(grid)
        assert spec == "notch-6"
        assert grid_from_spec(spec) == grid

    def test_custom_round_trips_by_value(self):
        grid = StimulusGrid(values=(1.0, 2.0, 4.0), name="mine", unit="J",
                            labels=("a", "b", "c"))
        spec = grid_to_spec(grid)
        assert isinstance(spec, dict)
        assert grid_from_spec(spec) == grid

    def test_custom_without_labels(self):
        grid = StimulusGrid(values=(5.0, 10.0))
        assert grid_from_spec(grid_to_spec(grid)) == grid

    def test_renamed_builtin_serialises_by_value(self):
        base = builtin_grid("notch-6")
        renamed = StimulusGrid(values=base.values, unit=base.unit,
                               name="bam-default", labels=base.labels)
        # name collides with a different builtin, so values must win
        spec = grid_to_spec(renamed)
        assert isinstance(spec, dict)
        assert grid_from_spec(spec) == renamed

    def test_alias_accepted(self):
        assert grid_from_spec("notch6") == builtin_grid("notch-6")

    def test_bad_specs(self):
        with pytest.raises(ConfigError):
            grid_from_spec("no-such-grid")
        with pytest.raises(ConfigError, match="bad grid spec"):
            grid_from_spec({"unit": "N"})


class TestDesignCodec:
    def test_up_down_round_trip(self):
        cfg = UpDownConfig(x1=100.0, d=0.3)
        spec = design_to_dict(cfg)
        assert spec["kind"] == "up-down"
        assert design_from_dict(json.loads(json.dumps(spec))) == cfg

    def test_bcd_round_trip_with_grid(self):
        cfg = BcdConfig(x1=60.0, d=0.2, p=0.1, grid=builtin_grid("all-intermediate"),
                        snap_policy="nearest-above", step_scale="log")
        back = design_from_dict(json.loads(json.dumps(design_to_dict(cfg))))
        assert back == cfg

    def test_bcd_round_trip_without_grid(self):
        cfg = BcdConfig(x1=60.0, d=0.2, p=0.3, grid=None)
        assert design_from_dict(design_to_dict(cfg)) == cfg

    def test_rmj_round_trip(self):
        cfg = RmjConfig(p=0.1, n=30, x1=90.0, tau1=0.8, beta_approx=2.0)
        assert design_from_dict(design_to_dict(cfg)) == cfg

    def test_rmj_defaults(self):
        cfg = design_from_dict({"kind": "rmj", "p": 0.5, "n": 20, "x1": 50.0})
        assert isinstance(cfg, RmjConfig)
        assert cfg.tau1 == 1.0 and cfg.beta_approx is None

    def test_un_staircase_round_trip(self):
        cfg = UnStaircaseConfig(grid=builtin_grid("notch-6"), k_negatives=6,
                                limiting_type="I", initial_stage=True,
                                start="mid-range")
        assert design_from_dict(json.loads(json.dumps(design_to_dict(cfg)))) == cfg

    def test_un_staircase_numeric_start(self):
        cfg = UnStaircaseConfig(grid=builtin_grid("notch-6"), k_negatives=3,
                                limiting_type="II", initial_stage=False,
                                start=120.0)
        back = design_from_dict(design_to_dict(cfg))
        assert back == cfg
        assert isinstance(back.start, float)

    def test_un_staircase_from_preset_spec(self):
        cfg = design_from_dict({"kind": "un-staircase", "preset": "i1",
                                "grid": "notch6"})
        ref = UnStaircaseConfig.from_preset("I1", builtin_grid("notch-6"))
        assert cfg == ref
        assert cfg.k_negatives == 6 and cfg.limiting_type == "I"

    def test_preset_spec_with_overrides(self):
        cfg = design_from_dict({
            "kind": "un-staircase", "preset": "f2", "grid": "notch-6",
            "initial_stage": False, "start": 360,
        })
        assert cfg.k_negatives == 25 and cfg.limiting_type == "II"
        assert cfg.start == 360.0

    def test_preset_without_required_fields_rejected(self):
        with pytest.raises(ConfigError, match="initial stage/start"):
            design_from_dict({"kind": "un-staircase", "preset": "f2",
                              "grid": "notch-6"})

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown design kind"):
            design_from_dict({"kind": "simplex"})

    def test_missing_fields(self):
        with pytest.raises(ConfigError, match="bad design spec"):
            design_from_dict({"kind": "bcd", "x1": 10.0})

    def test_not_a_design(self):
        with pytest.raises(ConfigError, match="not a design config"):
            design_to_dict(object())

    @pytest.mark.parametrize("cfg", [
        UpDownConfig(x1=10.0, d=0.1),
        BcdConfig(x1=10.0, d=0.1, p=0.25, grid=builtin_grid("notch-6")),
        RmjConfig(p=0.1, n=25, x1=80.0),
        UnStaircaseConfig(grid=builtin_grid("bam-default"), k_negatives=6,
                          limiting_type="I", initial_stage=True,
                          start="grid-max"),
    ])
    def test_every_design_spec_is_json_ready(self, cfg):
        text = json.dumps(design_to_dict(cfg))
        assert design_from_dict(json.loads(text)) == cfg
