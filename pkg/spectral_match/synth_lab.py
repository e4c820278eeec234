"""Synthetic markets, preference distributions and non-linear ground-truth utilities."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, DimensionMismatch
from .market_model import (
    Allocation,
    Market,
    even_capacities,
    expected_random_utilities,
    realized_utilities,
    utility_matrix,
    validate_market,
)
from .mechanism import svd_match
from .welfare import DEFAULT_EPSILON, WelfareReport, kendall_tau_rows, welfare_report

LOGGER = logging.getLogger(__name__)

PREFERENCE_LOW = 0.0
PREFERENCE_HIGH = 10.0


@dataclass(frozen=True)
class FeatureGenSpec:
    means: tuple
    std_devs: tuple

    def __post_init__(self) -> None:
        if len(self.means) != len(self.std_devs) or not self.means:
            raise ConfigError("feature means and std devs must be non-empty and of equal length")
        if any(s <= 0 for s in self.std_devs):
            raise ConfigError("feature std devs must be positive")

    @property
    def num_features(self) -> int:
        return len(self.means)


MEDIUM_SCALE_FEATURES = FeatureGenSpec(means=(7.0, 5.5, 6.0, 4.5, 5.0), std_devs=(2.0, 1.5, 1.0, 0.8, 0.5))


class PreferenceKind(str, Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"
    PARETO = "pareto"
    LOGNORMAL = "lognormal"
    BIMODAL = "bimodal"
    BETA25 = "beta25"
    EXPONENTIAL = "exponential"


DEFAULT_DIST_PARAMS: Dict[PreferenceKind, Dict[str, float]] = {
    PreferenceKind.NORMAL: {"mean": 5.0, "std": 2.0},
    PreferenceKind.UNIFORM: {"low": 0.0, "high": 10.0},
    # Lomax draw (classic Pareto minus its scale) stretched so the mean is 5.
    PreferenceKind.PARETO: {"shape": 2.0, "stretch": 5.0},
    PreferenceKind.LOGNORMAL: {"mu": 1.3, "sigma": 0.5},
    PreferenceKind.BIMODAL: {"low_mode": 3.0, "high_mode": 7.0, "std": 1.0},
    PreferenceKind.BETA25: {"a": 2.0, "b": 5.0, "scale": 10.0},
    PreferenceKind.EXPONENTIAL: {"mean": 5.0},
}


@dataclass(frozen=True)
class PreferenceDistSpec:
    kind: PreferenceKind = PreferenceKind.NORMAL
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        try:
            kind = PreferenceKind(self.kind)
        except ValueError as exc:
            raise ConfigError(f"unknown preference distribution {self.kind!r}") from exc
        merged = {**DEFAULT_DIST_PARAMS[kind], **self.params}
        unknown = set(merged) - set(DEFAULT_DIST_PARAMS[kind])
        if unknown:
            raise ConfigError(f"unknown parameters for {kind.value}: {sorted(unknown)}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", merged)


def gen_features(num_objects: int, spec: FeatureGenSpec, rng: np.random.Generator) -> np.ndarray:
    if num_objects < 1:
        raise ConfigError("need at least one object")
    return rng.normal(np.asarray(spec.means), np.asarray(spec.std_devs), size=(num_objects, spec.num_features))


def _draw(spec: PreferenceDistSpec, size: tuple, rng: np.random.Generator) -> np.ndarray:
    p = spec.params
    kind = spec.kind
    if kind is PreferenceKind.NORMAL:
        return rng.normal(p["mean"], p["std"], size)
    if kind is PreferenceKind.UNIFORM:
        return rng.uniform(p["low"], p["high"], size)
    if kind is PreferenceKind.PARETO:
        return p["stretch"] * rng.pareto(p["shape"], size)
    if kind is PreferenceKind.LOGNORMAL:
        return rng.lognormal(p["mu"], p["sigma"], size)
    if kind is PreferenceKind.BIMODAL:
        high = rng.random(size) < 0.5
        return np.where(high, rng.normal(p["high_mode"], p["std"], size), rng.normal(p["low_mode"], p["std"], size))
    if kind is PreferenceKind.BETA25:
        return p["scale"] * rng.beta(p["a"], p["b"], size)
    return rng.exponential(p["mean"], size)


def gen_preferences(
    num_agents: int,
    dist_spec: PreferenceDistSpec,
    rng: np.random.Generator,
    num_features: int = MEDIUM_SCALE_FEATURES.num_features,
) -> np.ndarray:
    """I.i.d. draws from the named family, clamped to the 0-10 scale."""

    if num_agents < 1:
        raise ConfigError("need at least one agent")
    raw = _draw(dist_spec, (num_agents, num_features), rng)
    return np.clip(raw, PREFERENCE_LOW, PREFERENCE_HIGH)


def noisy_reports(true_preferences: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ConfigError(f"noise sigma must be >= 0, got {sigma}")
    return true_preferences + sigma * rng.standard_normal(np.shape(true_preferences))


@dataclass(frozen=True)
class SyntheticMarketSpec:
    num_agents: int = 100
    num_objects: int = 20
    features: FeatureGenSpec = MEDIUM_SCALE_FEATURES
    distribution: PreferenceDistSpec = field(default_factory=PreferenceDistSpec)
    capacities: Optional[tuple] = None


def generate_market(spec: SyntheticMarketSpec, rng: np.random.Generator) -> Market:
    features = gen_features(spec.num_objects, spec.features, rng)
    preferences = gen_preferences(spec.num_agents, spec.distribution, rng, spec.features.num_features)
    capacities = spec.capacities
    if capacities is None:
        capacities = even_capacities(spec.num_agents, spec.num_objects)
    return validate_market(features, preferences, capacities)


class UtilityKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    COBB_DOUGLAS = "cobb_douglas"
    THRESHOLD = "threshold"
    CONCAVE = "concave"
    CONVEX = "convex"
    MAX_FEATURE = "max_feature"
    MLP = "mlp"
    RANK = "rank"
    RBF = "rbf"

    @property
    def number(self) -> int:
        return list(UtilityKind).index(self) + 1

    @classmethod
    def parse(cls, text: "str | int | UtilityKind") -> "UtilityKind":
        if isinstance(text, UtilityKind):
            return text
        token = str(text).strip().lower().replace("-", "_")
        if token.isdigit():
            number = int(token)
            if not 1 <= number <= len(cls):
                raise ConfigError(f"utility model number must be 1..{len(cls)}, got {number}")
            return list(cls)[number - 1]
        try:
            return cls(token)
        except ValueError as exc:
            raise ConfigError(f"unknown utility model {text!r}") from exc


# Additive models take their own strength scale; the rest blend linear and
# non-linear utility with a weight in [0, 1].
ADDITIVE_MODELS = frozenset({UtilityKind.QUADRATIC, UtilityKind.THRESHOLD, UtilityKind.RBF})

MAX_STRENGTH: Dict[UtilityKind, float] = {
    UtilityKind.LINEAR: 0.0,
    UtilityKind.QUADRATIC: 0.01,
    UtilityKind.COBB_DOUGLAS: 1.0,
    UtilityKind.THRESHOLD: 10.0,
    UtilityKind.CONCAVE: 1.0,
    UtilityKind.CONVEX: 1.0,
    UtilityKind.MAX_FEATURE: 1.0,
    UtilityKind.MLP: 1.0,
    UtilityKind.RANK: 1.0,
    UtilityKind.RBF: 50.0,
}

COBB_DOUGLAS_EPSILON = 0.1
MLP_WIDTH = 16
MLP_LEVEL = 10.0
RBF_BANDWIDTH = 5.0
# "objects": rank each feature across the market; "features": rank within one object.
RANK_SCOPES = ("objects", "features")


@dataclass(frozen=True)
class UtilityModelSpec:
    kind: UtilityKind = UtilityKind.LINEAR
    strength: Optional[float] = None
    thresholds: Optional[tuple] = None
    hidden_width: int = MLP_WIDTH
    bandwidth: float = RBF_BANDWIDTH
    rank_scope: str = "objects"
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", UtilityKind.parse(self.kind))
        if self.strength is not None and self.strength < 0:
            raise ConfigError(f"strength must be >= 0, got {self.strength}")
        if self.kind not in ADDITIVE_MODELS and self.strength is not None and self.strength > 1:
            raise ConfigError(f"{self.kind.value} blends with weight in [0, 1], got {self.strength}")
        if self.rank_scope not in RANK_SCOPES:
            raise ConfigError(f"rank scope must be one of {RANK_SCOPES}, got {self.rank_scope!r}")

    @property
    def effective_strength(self) -> float:
        return MAX_STRENGTH[self.kind] if self.strength is None else float(self.strength)

    def resolve(self, features: np.ndarray, rng: Optional[np.random.Generator] = None) -> "UtilityModelSpec":
        """Fill median thresholds from ``features`` and draw a missing MLP seed."""

        thresholds = self.thresholds
        if thresholds is None:
            thresholds = tuple(float(v) for v in np.median(np.atleast_2d(features), axis=0))
        seed = self.seed
        if seed is None and self.kind is UtilityKind.MLP:
            source = rng if rng is not None else np.random.default_rng(0)
            seed = int(source.integers(2**31))
        return replace(self, thresholds=thresholds, seed=seed)


def _mlp(model: UtilityModelSpec, preferences: np.ndarray, features: np.ndarray) -> np.ndarray:
    num_features = preferences.shape[1]
    weights = np.random.default_rng(model.seed)
    hidden_in = weights.standard_normal((3 * num_features, model.hidden_width))
    hidden_bias = weights.standard_normal(model.hidden_width)
    readout = weights.standard_normal(model.hidden_width)

    u = preferences[:, None, :] / 10.0
    f = features[None, :, :] / 10.0
    shape = (preferences.shape[0], features.shape[0], num_features)
    inputs = np.concatenate(
        [np.broadcast_to(u, shape), np.broadcast_to(f, shape), u * f],
        axis=2,
    )
    hidden = np.tanh(inputs @ hidden_in + hidden_bias)
    return hidden @ readout / np.sqrt(model.hidden_width) + MLP_LEVEL


def _nonlinear_part(model: UtilityModelSpec, preferences: np.ndarray, features: np.ndarray, linear: np.ndarray) -> np.ndarray:
    kind = model.kind
    thresholds = np.asarray(model.thresholds, dtype=float)
    if kind is UtilityKind.QUADRATIC:
        return linear * linear
    if kind is UtilityKind.THRESHOLD:
        return (features > thresholds).sum(axis=1)[None, :].astype(float)
    if kind is UtilityKind.RBF:
        distance = ((preferences[:, None, :] - features[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-distance / (2.0 * model.bandwidth**2))
    if kind is UtilityKind.COBB_DOUGLAS:
        totals = preferences.sum(axis=1, keepdims=True)
        exponents = np.divide(
            preferences,
            totals,
            out=np.full_like(preferences, 1.0 / preferences.shape[1]),
            where=totals > 0,
        )
        base = np.maximum(preferences[:, None, :] * features[None, :, :], 0.0) + COBB_DOUGLAS_EPSILON
        return np.exp((exponents[:, None, :] * np.log(base)).sum(axis=2))
    if kind is UtilityKind.CONCAVE:
        return preferences @ np.sqrt(np.maximum(features, 0.0)).T
    if kind is UtilityKind.CONVEX:
        return preferences @ (features**2).T
    if kind is UtilityKind.MAX_FEATURE:
        return preferences @ np.maximum(features - thresholds, 0.0).T
    if kind is UtilityKind.MLP:
        return _mlp(model, preferences, features)
    if kind is UtilityKind.RANK:
        axis = 0 if model.rank_scope == "objects" else 1
        return preferences @ rankdata(features, axis=axis).T
    raise ConfigError(f"no utility rule for {kind.value}")


def true_utility_matrix(model: UtilityModelSpec, preferences, features) -> np.ndarray:
    """Ground-truth utility of every agent for every object under ``model``."""

    preferences = np.atleast_2d(np.asarray(preferences, dtype=float))
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if preferences.shape[1] != features.shape[1]:
        raise DimensionMismatch(
            f"preferences have {preferences.shape[1]} columns, features have {features.shape[1]}"
        )
    linear = preferences @ features.T
    if model.kind is UtilityKind.LINEAR:
        return linear
    if model.thresholds is None or (model.kind is UtilityKind.MLP and model.seed is None):
        model = model.resolve(features)
    strength = model.effective_strength
    nonlinear = _nonlinear_part(model, preferences, features, linear)
    if model.kind in ADDITIVE_MODELS:
        return linear + strength * nonlinear
    return (1.0 - strength) * linear + strength * nonlinear


def true_utility(model: UtilityModelSpec, u, f) -> float:
    return float(true_utility_matrix(model, u, f)[0, 0])


@dataclass(frozen=True, eq=False)
class TauSummary:
    mean_tau: float
    per_agent: np.ndarray
    degenerate_count: int


@dataclass(frozen=True, eq=False)
class NonlinearTrialResult:
    proxy_allocation: Allocation
    true_welfare: WelfareReport
    tau_summary: TauSummary
    gain_over_random_pct: float
    true_utilities: np.ndarray


def percent_gain(mechanism_mean: float, random_mean: float) -> float:
    if random_mean == 0:
        return 0.0
    return float(100.0 * (mechanism_mean - random_mean) / abs(random_mean))


def nonlinear_trial(
    market: Market,
    model: UtilityModelSpec,
    rng: np.random.Generator,
    epsilon: float = DEFAULT_EPSILON,
) -> NonlinearTrialResult:
    """Match on the linear view of ``market`` and score the result under ``model``."""

    model = model.resolve(market.features, rng)
    allocation, _, _ = svd_match(market)
    true_values = true_utility_matrix(model, market.preferences, market.features)
    report = welfare_report(allocation, true_values, epsilon)

    taus = kendall_tau_rows(utility_matrix(market).values, true_values)
    degenerate = int(np.isnan(taus).sum())
    if degenerate:
        LOGGER.warning("%s agents have constant utility rows; excluded from mean tau", degenerate)
    mean_tau = float(np.nanmean(taus)) if degenerate < taus.size else float("nan")

    mechanism_mean = float(realized_utilities(allocation, true_values).mean())
    random_mean = float(expected_random_utilities(true_values, market.capacities).mean())
    return NonlinearTrialResult(
        proxy_allocation=allocation,
        true_welfare=report,
        tau_summary=TauSummary(mean_tau, taus, degenerate),
        gain_over_random_pct=percent_gain(mechanism_mean, random_mean),
        true_utilities=true_values,
    )
