import pytest

from src.config import (
    SEC5_CONFIG,
    config_from_mapping,
    config_to_text,
    load_config,
    parse_coefficients,
    parse_schedule,
)
from src.exceptions import ConfigurationError

BASE = {
    "plant.num": "10, 10",
    "plant.den": "1, 6, 8",
    "ts": "0.01",
    "n": "2",
    "l_delay": "1",
    "tp": "2",
    "td": "8",
    "tau": "0.5",
}


def test_example_config_loads():
    cfg = load_config(SEC5_CONFIG)
    assert cfg.plant.num == (10.0, 10.0)
    assert cfg.plant.den == (1.0, 6.0, 8.0)
    assert (cfg.ts, cfg.n, cfg.l_delay, cfg.tp, cfg.td, cfg.tau) == (0.01, 2, 1, 2, 8, 0.5)
    assert cfg.ref_steps == ((1.0, 1.0),)
    assert cfg.dist_steps == ((13.0, 0.2),)
    assert cfg.controllers == ("cbc", "unified", "imc")
    assert cfg.steps == 2500
    assert cfg.collection_plant == cfg.plant


def test_defaults_fill_optional_keys():
    cfg = config_from_mapping(dict(BASE))
    assert cfg.duration == 25.0
    assert cfg.seed == 0
    assert cfg.rank_tol == pytest.approx(1e-8)


def test_overrides_apply_on_top_of_file():
    cfg = load_config(SEC5_CONFIG, overrides={"seed": 9, "controllers": "unified"})
    assert cfg.seed == 9
    assert cfg.controllers == ("unified",)


def test_text_round_trip(tmp_path):
    cfg = load_config(SEC5_CONFIG)
    path = tmp_path / "copy.cfg"
    path.write_text(config_to_text(cfg), encoding="utf-8")
    assert load_config(path).with_overrides(source=None) == cfg.with_overrides(source=None)


def test_data_plant_keys_switch_collection_plant():
    cfg = config_from_mapping({**BASE, "data_plant.num": "9, 9", "data_plant.den": "1, 6, 8"})
    assert cfg.collection_plant.num == (9.0, 9.0)


@pytest.mark.parametrize("changes, message", [
    ({"tp": "1"}, "tp"),
    ({"ts": "0"}, "ts must be positive"),
    ({"l_delay": "0"}, "l_delay"),
    ({"duration": "-1"}, "duration"),
    ({"ref.steps": "5:1; 2:0"}, "time-sorted"),
    ({"controllers": "cbc,pid"}, "controllers"),
    ({"rank_tol": "2"}, "rank_tol"),
    ({"n": "two"}, "expected int"),
    ({"colour": "blue"}, "Unknown config keys"),
    ({"data_plant.num": "1"}, "together"),
])
def test_invalid_configs_rejected(changes, message):
    with pytest.raises(ConfigurationError, match=message):
        config_from_mapping({**BASE, **changes})


def test_missing_keys_listed():
    raw = dict(BASE)
    del raw["tau"]
    with pytest.raises(ConfigurationError, match="Missing config keys: tau"):
        config_from_mapping(raw)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_parse_helpers():
    assert parse_coefficients("1 2, 3", "k") == (1.0, 2.0, 3.0)
    assert parse_schedule("1:1; 13:0.2", "k") == ((1.0, 1.0), (13.0, 0.2))
    assert parse_schedule("", "k") == ()
    with pytest.raises(ConfigurationError, match="time:level"):
        parse_schedule("5", "k")
    with pytest.raises(ConfigurationError, match="malformed coefficient"):
        parse_coefficients("1, x", "k")
