import json
from pathlib import Path

import pytest

from spectral_match.config import ExperimentConfig, load_config, parse_float_list, parse_seeds
from spectral_match.errors import ConfigError, MalformedInput


def test_seed_count_and_list():
    assert parse_seeds("5") == [0, 1, 2, 3, 4]
    assert parse_seeds("3,7,11") == [3, 7, 11]
    assert parse_seeds(2) == [0, 1]
    with pytest.raises(ConfigError):
        parse_seeds("a,b")


def test_float_list():
    assert parse_float_list("0,0.5, 3") == [0.0, 0.5, 3.0]
    with pytest.raises(ConfigError):
        parse_float_list("one")


def test_defaults():
    config = load_config()
    assert config.num_agents == 100
    assert config.num_objects == 20
    assert config.mechanisms == ["svd", "random", "serial"]
    assert config.epsilon == pytest.approx(0.01)


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("SPECTRAL_MATCH_EPSILON", "0.05")
    monkeypatch.setenv("SPECTRAL_MATCH_FORMAT", "json")
    config = ExperimentConfig()
    assert config.epsilon == pytest.approx(0.05)
    assert config.output_format == "json"


def test_file_then_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seeds": 3, "noise_levels": [0, 1.5], "num_agents": 10}))
    config = load_config(path, num_agents=12, out="result.csv")
    assert config.seeds == [0, 1, 2]
    assert config.noise_levels == [0.0, 1.5]
    assert config.num_agents == 12
    assert config.out == Path("result.csv")


def test_unknown_key(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"agents": 3}))
    with pytest.raises(ConfigError):
        load_config(path)


def test_unreadable_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(MalformedInput):
        load_config(path)


@pytest.mark.parametrize(
    "overrides",
    [
        {"epsilon": 0.0},
        {"mechanisms": "svd,hungarian"},
        {"noise_levels": "-1"},
        {"output_format": "xml"},
        {"features_path": "f.csv"},
    ],
)
def test_invalid_settings(overrides):
    with pytest.raises(ConfigError):
        load_config(**overrides)


def test_bundle_and_triple_are_exclusive():
    with pytest.raises(ConfigError):
        load_config(features_path="f.csv", preferences_path="p.csv", capacities_path="c.csv", market_path="m.json")


def test_malformed_environment_value(monkeypatch):
    monkeypatch.setenv("SPECTRAL_MATCH_ORACLE_BUDGET", "lots")
    with pytest.raises(ConfigError):
        ExperimentConfig()
