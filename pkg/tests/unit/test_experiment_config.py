# tests/unit/test_experiment_config.py

import math

import pytest
from pydantic import ValidationError

from flowtopo.core.config import Settings, get_settings
from flowtopo.schemas.denoise import Aggregator, FilterKind
from flowtopo.schemas.experiment import SweepConfig


# ---------------------------------------------
# Settings
# ---------------------------------------------

def test_settings_defaults():
    cfg = Settings(_env_file=None)
    assert cfg.FLOWTOPO_THREADS == 1
    assert cfg.TAU_MIN == 15
    assert cfg.RECURRENCE_TOL_SAMPLES == 2
    assert cfg.GOLDEN_TOL == 1e-6


def test_settings_read_the_environment(monkeypatch):
    monkeypatch.setenv("FLOWTOPO_THREADS", "4")
    monkeypatch.setenv("TAU_MIN", "7")
    get_settings.cache_clear()
    assert get_settings().FLOWTOPO_THREADS == 4
    assert get_settings().TAU_MIN == 7


# ---------------------------------------------
# Sweep configuration
# ---------------------------------------------

def test_sweep_config_from_file(tmp_path):
    path = tmp_path / "sweep.env"
    path.write_text(
        "SNR_DB=0, 10,inf\n"
        "SEEDS=0,1\n"
        "FILTERS=moving-average,knn,Spherical\n"
        "AGGREGATOR=geometric-median\n"
        "SCALE_ANCHOR=schedule:2\n"
        "CHIRP_N=150\n"
        "CHIRP_F_END=8\n"
    )
    config = SweepConfig.from_file(path)
    assert config.snr_db == [0.0, 10.0, math.inf]
    assert config.seeds == [0, 1]
    assert config.filters == [FilterKind.MOVING_AVERAGE, FilterKind.KNN, FilterKind.SPHERICAL]
    assert config.aggregator == Aggregator.GEOMETRIC_MEDIAN
    assert config.anchor.schedule_index == 2
    assert config.chirp.n == 150 and config.chirp.f_end == 8.0
    assert [spec.label for spec in config.filter_specs()] == ["moving_average_20", "knn_20_gm", "spherical_gm"]


def test_overrides_win_over_the_file(tmp_path):
    path = tmp_path / "sweep.env"
    path.write_text("SNR_DB=0\nSEEDS=0\nFILTERS=knn\n")
    config = SweepConfig.from_file(path, {"seeds": "3,4", "knn_k": "5"})
    assert config.seeds == [3, 4]
    assert config.knn_k == 5


@pytest.mark.parametrize(
    "values",
    [
        {"snr_db": "0", "seeds": "0", "filters": "knn", "windw": "3"},
        {"snr_db": "0", "seeds": "0", "filters": "median"},
        {"snr_db": "", "seeds": "0", "filters": "knn"},
        {"snr_db": "0", "seeds": "0", "filters": "knn", "scale_anchor": "birth"},
    ],
    ids=["unknown_key", "unknown_filter", "empty_snr_list", "bad_anchor"],
)
def test_invalid_configs_are_rejected(values):
    with pytest.raises(ValidationError):
        SweepConfig.from_mapping(values)


def test_unknown_chirp_key_is_rejected():
    with pytest.raises(ValueError, match="chirp_speed"):
        SweepConfig.from_mapping({"snr_db": "0", "seeds": "0", "filters": "knn", "CHIRP_SPEED": "2"})


def test_neighborhood_follows_tau_and_k():
    config = SweepConfig.from_mapping({"snr_db": "0", "seeds": "0", "filters": "knn", "tau": "1", "k": "4"})
    assert config.neighborhood.tau == 1 and config.neighborhood.k == 4
