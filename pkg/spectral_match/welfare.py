"""Evaluation metrics: Nash social welfare, IR accounting, KS distance and Kendall tau."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import kendalltau

from .errors import ConfigError, DegenerateAllTies, DimensionMismatch, EmptySample
from .market_model import Allocation, UtilityLike, as_utility_values, gains_over_disagreement, realized_utilities

LOGGER = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.01


@dataclass(frozen=True, eq=False)
class WelfareReport:
    gains: np.ndarray
    log_nsw_strict: float
    log_nsw_clipped: float
    ir_violation_count: int
    ir_violation_rate: float
    mean_utility: float
    median_utility: float
    min_utility: float
    max_utility: float
    std_dev: float

    def summary(self) -> dict:
        return {
            "mean_utility": self.mean_utility,
            "median_utility": self.median_utility,
            "min_utility": self.min_utility,
            "max_utility": self.max_utility,
            "std_dev": self.std_dev,
            "log_nsw_strict": self.log_nsw_strict,
            "log_nsw_clipped": self.log_nsw_clipped,
            "ir_violation_count": self.ir_violation_count,
            "ir_violation_rate": self.ir_violation_rate,
        }


def log_nsw(gains: np.ndarray) -> float:
    """Sum of log gains, or ``-inf`` when any gain is not strictly positive."""

    gains = np.asarray(gains, dtype=float)
    if (gains <= 0).any():
        return -math.inf
    return float(np.log(gains).sum())


def clipped_log_nsw(gains: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> float:
    check_epsilon(epsilon)
    return float(np.log(np.maximum(np.asarray(gains, dtype=float), epsilon)).sum())


def nsw_product(gains: np.ndarray) -> float:
    gains = np.asarray(gains, dtype=float)
    if (gains <= 0).any():
        return 0.0
    return float(np.prod(gains))


def check_epsilon(epsilon: float) -> None:
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")


def welfare_report(
    allocation: Allocation,
    utilities: UtilityLike,
    epsilon: float = DEFAULT_EPSILON,
) -> WelfareReport:
    check_epsilon(epsilon)
    values = as_utility_values(utilities)
    realized = realized_utilities(allocation, values)
    gains = gains_over_disagreement(values, realized)
    violations = int((gains < 0).sum())
    gains.setflags(write=False)
    return WelfareReport(
        gains=gains,
        log_nsw_strict=log_nsw(gains),
        log_nsw_clipped=clipped_log_nsw(gains, epsilon),
        ir_violation_count=violations,
        ir_violation_rate=violations / gains.size,
        mean_utility=float(realized.mean()),
        median_utility=float(np.median(realized)),
        min_utility=float(realized.min()),
        max_utility=float(realized.max()),
        std_dev=float(realized.std()),
    )


def percent_of_upper_bound(log_nsw_clipped: float, bound: float, num_agents: int) -> float:
    """Geometric-mean clipped gain as a percentage of the greedy per-agent best."""

    return float(100.0 * math.exp((log_nsw_clipped - bound) / num_agents))


def _sample(values, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptySample(f"{name} is empty")
    return values


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov distance of the empirical CDFs."""

    a = np.sort(_sample(sample_a, "sample_a"))
    b = np.sort(_sample(sample_b, "sample_b"))
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_distance_rows(samples_a, samples_b) -> np.ndarray:
    """Row-wise two-sample KS distance for equally shaped matrices."""

    a = np.atleast_2d(np.asarray(samples_a, dtype=float))
    b = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatch(f"sample matrices differ in shape: {a.shape} vs {b.shape}")
    if a.shape[1] == 0:
        raise EmptySample("samples have no columns")
    pooled = np.concatenate([a, b], axis=1)
    cdf_a = (a[:, None, :] <= pooled[:, :, None]).mean(axis=2)
    cdf_b = (b[:, None, :] <= pooled[:, :, None]).mean(axis=2)
    return np.abs(cdf_a - cdf_b).max(axis=1)


def ks_distance_to_cdf(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """One-sample KS distance of each row's empirical CDF from ``cdf``."""

    values = np.sort(np.atleast_2d(np.asarray(samples, dtype=float)), axis=1)
    size = values.shape[1]
    if size == 0:
        raise EmptySample("samples have no columns")
    reference = cdf(values)
    steps = np.arange(1, size + 1) / size
    upper = (steps - reference).max(axis=1)
    lower = (reference - (steps - 1.0 / size)).max(axis=1)
    return np.maximum(upper, lower)


def mean_ks(true_preferences, reported_preferences) -> float:
    return float(ks_distance_rows(true_preferences, reported_preferences).mean())


def dkwm_lambda(num_features: int, delta: float) -> float:
    if num_features < 1:
        raise ConfigError(f"sample size must be >= 1, got {num_features}")
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * num_features))


def dkwm_bound(lam: float, num_features: int) -> float:
    return 2.0 * math.exp(-2.0 * lam * lam * num_features)


def kendall_tau(scores_a, scores_b) -> float:
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"score vectors differ in shape: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise DimensionMismatch("Kendall tau needs at least two scores")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateAllTies("Kendall tau is undefined for a constant score vector")
    return float(np.clip(kendalltau(a, b, variant="b")[0], -1.0, 1.0))


def kendall_tau_rows(scores_a, scores_b) -> np.ndarray:
    """Tau-b for each pair of matching rows; NaN where a row is constant."""

    a = np.atleast_2d(np.asarray(scores_a, dtype=float))
    b = np.atleast_2d(np.asarray(scores_b, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatch(f"score matrices differ in shape: {a.shape} vs {b.shape}")
    size = a.shape[1]
    upper = np.triu(np.ones((size, size), dtype=bool), k=1)
    sign_a = np.sign(a[:, :, None] - a[:, None, :])[:, upper]
    sign_b = np.sign(b[:, :, None] - b[:, None, :])[:, upper]
    numerator = (sign_a * sign_b).sum(axis=1)
    untied_a = np.count_nonzero(sign_a, axis=1)
    untied_b = np.count_nonzero(sign_b, axis=1)
    denominator = np.sqrt(untied_a.astype(float) * untied_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.where(denominator > 0, numerator / denominator, np.nan)
    return np.clip(tau, -1.0, 1.0)


def truthfulness_trial(
    true_preferences,
    noise_sigma: float,
    rng: np.random.Generator,
    noise: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, "float | np.ndarray"]:
    """Add zero-mean Gaussian noise to true weights and measure the KS distance.

    A single weight vector yields a float; a matrix yields one distance per row.
    ``noise`` may carry pre-drawn standard normals so several sigmas share draws.
    """

    if noise_sigma < 0:
        raise ConfigError(f"noise sigma must be >= 0, got {noise_sigma}")
    true_preferences = np.asarray(true_preferences, dtype=float)
    if noise is None:
        noise = rng.standard_normal(true_preferences.shape)
    reported = true_preferences + noise_sigma * noise
    if true_preferences.ndim == 1:
        return reported, ks_distance(reported, true_preferences)
    return reported, ks_distance_rows(reported, true_preferences)
