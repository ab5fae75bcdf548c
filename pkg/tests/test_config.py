import warnings
from pathlib import Path

import pytest

from noma_vec.config import (Config, ConfigError, PaperRangeWarning, config_to_dict, dbm_to_watt,
                             load_config, validate_config, watt_to_dbm)

ROOT = Path(__file__).resolve().parents[1]


def test_empty_config_is_all_defaults():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert validate_config({}) == Config()
        assert validate_config(None) == Config()


def test_shipped_default_file_matches_code_defaults():
    assert load_config(ROOT / "configs" / "default.toml") == Config()


def test_subchannels_must_equal_cus():
    with pytest.raises(ConfigError) as exc:
        validate_config({"scenario": {"num_scs": 50}})
    assert any("F = U" in e for e in exc.value.errors)


def test_every_violation_is_reported():
    raw = {"scenario": {"num_tvus": 70, "num_scs": 10, "bandwidth_hz": -1.0, "bogus": 1},
           "solver": {"power_formula": "other"}, "extra": {}}
    with pytest.raises(ConfigError) as exc:
        validate_config(raw)
    errs = exc.value.errors
    assert len(errs) >= 6
    for needle in ("num_tvus", "num_scs", "bandwidth_hz", "bogus", "power_formula", "[extra]"):
        assert any(needle in e for e in errs), needle


def test_out_of_range_power_only_warns():
    with pytest.warns(PaperRangeWarning, match="35"):
        cfg = validate_config({"scenario": {"p_tvu_dbm_max": 35.0}})
    assert cfg.scenario.p_tvu_dbm_max == 35.0


def test_task_size_outside_reference_range_warns():
    with pytest.warns(PaperRangeWarning):
        validate_config({"scenario": {"task_bits_max": 5e5}})


def test_round_trip_through_dict():
    cfg = Config().with_scenario(num_tvus=7).with_solver(conv_tol=1e-4)
    assert validate_config(config_to_dict(cfg)) == cfg


@pytest.mark.parametrize("dbm,w", [(30.0, 1.0), (20.0, 0.1), (0.0, 1e-3)])
def test_dbm_conversion(dbm, w):
    assert dbm_to_watt(dbm) == pytest.approx(w, rel=1e-12)
    assert watt_to_dbm(w) == pytest.approx(dbm, abs=1e-12)


def test_noise_power_default():
    # -174 dBm/Hz + 9 dB over 180 kHz
    assert Config().scenario.noise_w == pytest.approx(dbm_to_watt(-165 + 52.5527250510331), rel=1e-9)
