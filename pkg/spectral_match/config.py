"""Configuration helpers for matching experiments."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
import json
import os
from pathlib import Path
from typing import Any, List, Optional

from .errors import ConfigError, MalformedInput

MECHANISM_NAMES = ("svd", "svd2d", "random", "serial", "oracle")
OUTPUT_FORMATS = ("csv", "json")
DEFAULT_NOISE_LEVELS = (0.0, 0.5, 1.0, 2.0, 3.0)


def _get_env(name: str, default: str, cast=str):
    """Fetch an optional environment variable and convert it with ``cast``."""

    value = os.environ.get(name, default)
    try:
        return cast(value)
    except ValueError as exc:
        raise ConfigError(f"Environment variable {name}={value!r} is not a valid {cast.__name__}") from exc


def parse_seeds(text: "str | int | list") -> List[int]:
    """``"5"`` means seeds 0..4, ``"3,7,11"`` is taken literally."""

    if isinstance(text, list):
        return [int(seed) for seed in text]
    if isinstance(text, int):
        return list(range(text))
    parts = [part.strip() for part in str(text).split(",") if part.strip()]
    try:
        if len(parts) == 1 and "," not in str(text):
            return list(range(int(parts[0])))
        return [int(part) for part in parts]
    except ValueError as exc:
        raise ConfigError(f"cannot parse seeds from {text!r}") from exc


def parse_float_list(text: "str | list") -> List[float]:
    if isinstance(text, list):
        return [float(value) for value in text]
    try:
        return [float(part) for part in str(text).split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc


def parse_name_list(text: "str | list") -> List[str]:
    if isinstance(text, list):
        return [str(name).strip().lower() for name in text]
    return [part.strip().lower() for part in str(text).split(",") if part.strip()]


@dataclass
class ExperimentConfig:
    """Everything one CLI run needs; defaults come from the environment."""

    features_path: Optional[Path] = None
    preferences_path: Optional[Path] = None
    capacities_path: Optional[Path] = None
    market_path: Optional[Path] = None

    num_agents: int = 100
    num_objects: int = 20
    feature_means: List[float] = field(default_factory=lambda: [7.0, 5.5, 6.0, 4.5, 5.0])
    feature_std_devs: List[float] = field(default_factory=lambda: [2.0, 1.5, 1.0, 0.8, 0.5])

    mechanisms: List[str] = field(default_factory=lambda: ["svd", "random", "serial"])
    noise_levels: List[float] = field(default_factory=lambda: [0.0])
    distributions: List[str] = field(default_factory=lambda: ["normal"])
    models: List[str] = field(default_factory=list)
    strength: Optional[float] = None
    seeds: List[int] = field(default_factory=lambda: [0])

    epsilon: float = field(default_factory=lambda: _get_env("SPECTRAL_MATCH_EPSILON", "0.01", float))
    output_format: str = field(default_factory=lambda: _get_env("SPECTRAL_MATCH_FORMAT", "csv"))
    out: Optional[Path] = None
    include_timings: bool = True

    oracle_budget: int = field(
        default_factory=lambda: _get_env("SPECTRAL_MATCH_ORACLE_BUDGET", "10000000", int)
    )
    timing_repeats: int = field(
        default_factory=lambda: _get_env("SPECTRAL_MATCH_TIMING_REPEATS", "5", int)
    )
    noise_replications: int = field(
        default_factory=lambda: _get_env("SPECTRAL_MATCH_NOISE_REPLICATIONS", "32", int)
    )

    @property
    def has_file_market(self) -> bool:
        return self.market_path is not None or any(
            path is not None for path in (self.features_path, self.preferences_path, self.capacities_path)
        )

    def validate(self) -> "ExperimentConfig":
        triple = (self.features_path, self.preferences_path, self.capacities_path)
        if any(path is not None for path in triple):
            if self.market_path is not None:
                raise ConfigError("give either a bundled market file or the CSV triple, not both")
            if any(path is None for path in triple):
                raise ConfigError("--features, --preferences and --capacities must be given together")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if any(level < 0 for level in self.noise_levels):
            raise ConfigError("noise levels must be >= 0")
        unknown = [name for name in self.mechanisms if name not in MECHANISM_NAMES]
        if unknown:
            raise ConfigError(f"unknown mechanisms {unknown}; choose from {list(MECHANISM_NAMES)}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"output format must be one of {list(OUTPUT_FORMATS)}")
        if self.num_agents < 1 or self.num_objects < 1:
            raise ConfigError("synthetic markets need at least one agent and one object")
        if self.timing_repeats < 1 or self.noise_replications < 1:
            raise ConfigError("timing repeats and noise replications must be >= 1")
        return self

    def echo(self) -> dict:
        """Plain-type view of the config for run records."""

        out: dict = {}
        for item in fields(self):
            value = getattr(self, item.name)
            out[item.name] = str(value) if isinstance(value, Path) else value
        return out


_PATH_FIELDS = {"features_path", "preferences_path", "capacities_path", "market_path", "out"}
_PARSERS = {
    "seeds": parse_seeds,
    "noise_levels": parse_float_list,
    "mechanisms": parse_name_list,
    "distributions": parse_name_list,
    "models": parse_name_list,
}


def _coerce(name: str, value: Any) -> Any:
    if value is None:
        return None
    if name in _PATH_FIELDS:
        return Path(value)
    if name in _PARSERS:
        return _PARSERS[name](value)
    return value


def load_config(path: Optional[Path] = None, **overrides: Any) -> ExperimentConfig:
    """Build a config from env defaults, an optional JSON file and CLI overrides."""

    config = ExperimentConfig()
    known = {item.name for item in fields(ExperimentConfig)}
    payload: dict = {}
    if path is not None:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInput(f"cannot read config {path}: {exc}") from exc
        if not isinstance(payload, dict):
            raise MalformedInput(f"config {path} must hold a JSON object")
    for source in (payload, overrides):
        for name, value in source.items():
            if name not in known:
                raise ConfigError(f"unknown config key {name!r}")
            if value is not None:
                setattr(config, name, _coerce(name, value))
    return config.validate()
