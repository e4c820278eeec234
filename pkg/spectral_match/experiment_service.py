"""High level orchestration for match, bench, robustness and the worked example."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .config import ExperimentConfig
from .errors import DegenerateSpectrum
from .market_io import load_market_csv, load_market_json
from .market_model import (
    Allocation,
    Market,
    expected_random_utilities,
    realized_utilities,
    utility_matrix,
    validate_market,
)
from .mechanism import MECHANISMS, random_priority, svd_match
from .oracle import greedy_log_nsw_upper_bound, optimal_nsw_bruteforce, try_oracle
from .spectral import diagnose, explained_variance_ratios, svd
from .synth_lab import (
    ADDITIVE_MODELS,
    FeatureGenSpec,
    PreferenceDistSpec,
    PreferenceKind,
    SyntheticMarketSpec,
    UtilityKind,
    UtilityModelSpec,
    generate_market,
    nonlinear_trial,
    percent_gain,
)
from .timing import PHASES, PhaseTimer
from .welfare import mean_ks, nsw_product, percent_of_upper_bound, welfare_report

LOGGER = logging.getLogger(__name__)

PEDAGOGICAL_FEATURES = np.array([[8.5, 1.5, 8.0], [1.5, 8.5, 7.5], [5.5, 5.5, 9.0]])
PEDAGOGICAL_PREFERENCES = np.array([[8.0, 2.0, 7.0], [2.0, 8.0, 7.0], [5.0, 5.0, 8.0]])


def pedagogical_market() -> Market:
    """Three products (quality, price value, brand) and three consumers."""

    return validate_market(PEDAGOGICAL_FEATURES, PEDAGOGICAL_PREFERENCES, [1, 1, 1])


@dataclass
class MechanismOutcome:
    mechanism: str
    allocation: Optional[List[int]]
    metrics: Dict[str, float]


@dataclass
class RunRecord:
    """One market evaluated under several mechanisms; plain Python values only."""

    seed: Optional[int]
    noise: float
    distribution: str
    outcomes: Dict[str, MechanismOutcome] = field(default_factory=dict)
    diagnostics: Optional[dict] = None
    timings: Optional[Dict[str, float]] = None
    mean_ks: Optional[float] = None
    config: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "noise": self.noise,
            "distribution": self.distribution,
            "mechanisms": {
                name: {"allocation": outcome.allocation, **outcome.metrics}
                for name, outcome in self.outcomes.items()
            },
            "diagnostics": self.diagnostics,
            "timings": self.timings,
            "mean_ks": self.mean_ks,
            "config": self.config,
        }

    def rows(self, include_timings: bool = True) -> List[dict]:
        """One flat row per mechanism, ordered by mechanism name."""

        out = []
        for name in sorted(self.outcomes):
            row = {
                "seed": self.seed,
                "distribution": self.distribution,
                "noise": self.noise,
                "mechanism": name,
                **self.outcomes[name].metrics,
                "mean_ks": self.mean_ks,
            }
            if self.diagnostics is not None:
                row["rho1"] = self.diagnostics["rho1"]
                row["band"] = self.diagnostics["band"]
            if include_timings and self.timings is not None:
                row.update({f"svd_time_us.{phase}": value for phase, value in self.timings.items()})
            out.append(row)
        return out


def time_svd_match(market: Market, repeats: int = 5) -> Dict[str, float]:
    """Median microseconds per phase over ``repeats`` runs of the spectral matching."""

    samples: Dict[str, List[float]] = {name: [] for name in (*PHASES, "total")}
    for _ in range(repeats):
        timer = PhaseTimer()
        svd_match(market, timer)
        for name, value in timer.as_dict().items():
            samples[name].append(value)
    medians = {name: round(float(np.median(values)), 1) for name, values in samples.items()}
    LOGGER.debug("svd_match phase medians (us): %s", medians)
    return medians


def _finite_mean_tau(kind: UtilityKind, taus: List[float]) -> float:
    taus = np.asarray(taus, dtype=float)
    defined = taus[~np.isnan(taus)]
    if defined.size == 0:
        LOGGER.warning("Kendall tau undefined for every seed under %s; reporting 0.0", kind.value)
        return 0.0
    return float(defined.mean())


def evaluate_allocation(
    allocation: Allocation,
    true_values: np.ndarray,
    capacities: np.ndarray,
    epsilon: float,
    random_mean: Optional[float] = None,
) -> Dict[str, float]:
    report = welfare_report(allocation, true_values, epsilon)
    bound = greedy_log_nsw_upper_bound(true_values, epsilon)
    if random_mean is None:
        random_mean = float(expected_random_utilities(true_values, capacities).mean())
    metrics = report.summary()
    metrics["gain_over_random_pct"] = percent_gain(report.mean_utility, random_mean)
    metrics["percent_of_bound"] = percent_of_upper_bound(
        report.log_nsw_clipped, bound, allocation.num_agents
    )
    return metrics


def _average(metric_dicts: List[Dict[str, float]]) -> Dict[str, float]:
    keys = metric_dicts[0].keys()
    return {key: float(np.mean([metrics[key] for metrics in metric_dicts])) for key in keys}


def distribution_kinds(names: List[str]) -> List[PreferenceKind]:
    if any(name == "all" for name in names):
        return list(PreferenceKind)
    return [PreferenceDistSpec(name).kind for name in names]


def _seed_streams(seed: int) -> tuple:
    market_seq, noise_seq, mechanism_seq = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(market_seq),
        np.random.default_rng(noise_seq),
        np.random.default_rng(mechanism_seq),
    )


class ExperimentService:
    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def synthetic_spec(self, kind: PreferenceKind = PreferenceKind.NORMAL) -> SyntheticMarketSpec:
        return SyntheticMarketSpec(
            num_agents=self.config.num_agents,
            num_objects=self.config.num_objects,
            features=FeatureGenSpec(tuple(self.config.feature_means), tuple(self.config.feature_std_devs)),
            distribution=PreferenceDistSpec(kind),
        )

    def load_market(self, seed: int = 0) -> Market:
        config = self.config
        if config.market_path is not None:
            return load_market_json(config.market_path)
        if config.features_path is not None:
            return load_market_csv(config.features_path, config.preferences_path, config.capacities_path)
        kind = distribution_kinds(config.distributions)[0]
        return generate_market(self.synthetic_spec(kind), _seed_streams(seed)[0])

    def _run_mechanism(self, name: str, market: Market, rng: np.random.Generator, *, strict: bool) -> Optional[Allocation]:
        if name != "oracle":
            return MECHANISMS[name](market, rng)
        if strict:
            return optimal_nsw_bruteforce(market, budget=self.config.oracle_budget).best_allocation
        result = try_oracle(market, self.config.oracle_budget)
        return None if result is None else result.best_allocation

    def run_match(self) -> RunRecord:
        config = self.config
        seed = config.seeds[0]
        market = self.load_market(seed)
        _, _, mechanism_rng = _seed_streams(seed)
        values = utility_matrix(market).values

        # Reports are taken as truthful here.
        record = RunRecord(
            seed=seed, noise=0.0, distribution=self._source_label(), config=config.echo(), mean_ks=0.0
        )
        try:
            record.diagnostics = diagnose(market.features).to_dict()
        except DegenerateSpectrum:
            if "svd" in config.mechanisms or "svd2d" in config.mechanisms:
                raise
            LOGGER.warning("Feature matrix is all zero; diagnostics skipped")
        for name in config.mechanisms:
            allocation = self._run_mechanism(name, market, mechanism_rng, strict=True)
            record.outcomes[name] = MechanismOutcome(
                name,
                allocation.assignment.tolist(),
                evaluate_allocation(allocation, values, market.capacities, config.epsilon),
            )
        if "svd" in config.mechanisms and config.include_timings:
            record.timings = time_svd_match(market, config.timing_repeats)
        LOGGER.info("Matched %s agents with %s", market.num_agents, ", ".join(config.mechanisms))
        return record

    def _source_label(self) -> str:
        if self.config.has_file_market:
            return "file"
        return distribution_kinds(self.config.distributions)[0].value

    def run_bench(self) -> List[RunRecord]:
        """Seeds x distributions x noise levels; mechanisms see noisy reports, scoring uses true weights."""

        config = self.config
        records: List[RunRecord] = []
        for kind in distribution_kinds(config.distributions):
            for seed in config.seeds:
                records.extend(self._bench_seed(seed, kind))
        records.sort(key=lambda record: (record.distribution, record.seed, record.noise))
        LOGGER.info("Bench finished: %s records", len(records))
        return records

    def _bench_seed(self, seed: int, kind: PreferenceKind) -> List[RunRecord]:
        config = self.config
        market_rng, noise_rng, mechanism_rng = _seed_streams(seed)
        if config.has_file_market:
            market = self.load_market(seed)
        else:
            market = generate_market(self.synthetic_spec(kind), market_rng)
        true_values = utility_matrix(market).values
        shared_noise = noise_rng.standard_normal(
            (config.noise_replications, market.num_agents, market.num_features)
        )

        records = []
        for sigma in config.noise_levels:
            replications = 1 if sigma == 0 else config.noise_replications
            per_mechanism: Dict[str, List[Dict[str, float]]] = {name: [] for name in config.mechanisms}
            ks_values = []
            timings = None
            for rep in range(replications):
                reported = market.preferences + sigma * shared_noise[rep]
                noisy_market = market.with_preferences(reported)
                ks_values.append(mean_ks(market.preferences, reported))
                baseline = realized_utilities(random_priority(noisy_market, mechanism_rng), true_values).mean()
                for name in config.mechanisms:
                    allocation = self._run_mechanism(name, noisy_market, mechanism_rng, strict=False)
                    if allocation is None:
                        continue
                    per_mechanism[name].append(
                        evaluate_allocation(allocation, true_values, market.capacities, config.epsilon, float(baseline))
                    )
                if rep == 0 and config.include_timings and "svd" in config.mechanisms:
                    timings = time_svd_match(noisy_market, config.timing_repeats)
            record = RunRecord(
                seed=seed,
                noise=float(sigma),
                distribution=kind.value if not config.has_file_market else "file",
                timings=timings,
                mean_ks=float(np.mean(ks_values)),
            )
            for name, metric_dicts in per_mechanism.items():
                if metric_dicts:
                    record.outcomes[name] = MechanismOutcome(name, None, _average(metric_dicts))
            records.append(record)
        return records

    def run_robustness(self) -> Dict[str, List[dict]]:
        config = self.config
        grid = self._noise_grid()
        lowest = min(config.noise_levels) if config.noise_levels else 0.0
        return {
            "cross_distribution": [dict(row) for row in grid if row["noise"] == lowest],
            "noise_sensitivity": grid,
            "nonlinear": self._nonlinear_table(),
        }

    def _noise_grid(self) -> List[dict]:
        config = self.config
        rows = []
        for kind in distribution_kinds(config.distributions):
            cells: Dict[float, List[Dict[str, float]]] = {sigma: [] for sigma in config.noise_levels}
            for seed in config.seeds:
                market_rng, noise_rng, _ = _seed_streams(seed)
                market = generate_market(self.synthetic_spec(kind), market_rng)
                true_values = utility_matrix(market).values
                shared_noise = noise_rng.standard_normal(
                    (config.noise_replications, market.num_agents, market.num_features)
                )
                for sigma in config.noise_levels:
                    replications = 1 if sigma == 0 else config.noise_replications
                    for rep in range(replications):
                        reported = market.preferences + sigma * shared_noise[rep]
                        allocation = svd_match(market.with_preferences(reported))[0]
                        metrics = evaluate_allocation(allocation, true_values, market.capacities, config.epsilon)
                        metrics["mean_ks"] = mean_ks(market.preferences, reported)
                        cells[sigma].append(metrics)
            for sigma in config.noise_levels:
                averaged = _average(cells[sigma])
                rows.append(
                    {
                        "distribution": kind.value,
                        "noise": float(sigma),
                        "gain_over_random_pct": averaged["gain_over_random_pct"],
                        "log_nsw_clipped": averaged["log_nsw_clipped"],
                        "percent_of_bound": averaged["percent_of_bound"],
                        "ir_violation_rate": averaged["ir_violation_rate"],
                        "mean_ks": averaged["mean_ks"],
                    }
                )
            LOGGER.info("Robustness grid done for %s", kind.value)
        return rows

    def _nonlinear_table(self) -> List[dict]:
        config = self.config
        if not config.models:
            return []
        kinds = [UtilityKind.parse(name) for name in config.models]
        gains: Dict[UtilityKind, List[float]] = {kind: [] for kind in kinds}
        taus: Dict[UtilityKind, List[float]] = {kind: [] for kind in kinds}
        linear_gains = []
        for seed in config.seeds:
            market_rng, _, model_rng = _seed_streams(seed)
            market = generate_market(self.synthetic_spec(), market_rng)
            linear = nonlinear_trial(market, UtilityModelSpec(UtilityKind.LINEAR), model_rng, config.epsilon)
            linear_gains.append(linear.gain_over_random_pct)
            for kind in kinds:
                strength = config.strength
                if strength is not None and kind not in ADDITIVE_MODELS:
                    strength = min(strength, 1.0)
                trial = nonlinear_trial(market, UtilityModelSpec(kind, strength), model_rng, config.epsilon)
                gains[kind].append(trial.gain_over_random_pct)
                taus[kind].append(trial.tau_summary.mean_tau)
        linear_mean = float(np.mean(linear_gains))
        rows = []
        for kind in kinds:
            gain = float(np.mean(gains[kind]))
            loss = 0.0 if linear_mean == 0 else 100.0 * (linear_mean - gain) / abs(linear_mean)
            rows.append(
                {
                    "model": f"{kind.number}. {kind.value}",
                    "gain_over_random_pct": gain,
                    "loss_vs_linear_pct": loss,
                    "mean_tau": _finite_mean_tau(kind, taus[kind]),
                }
            )
        return rows


def pedagogical_transcript() -> tuple[str, dict]:
    """Walk the three-product example end to end; returns printable text and the raw numbers."""

    market = pedagogical_market()
    summary = svd(market.features)
    allocation, trace, report = svd_match(market)
    values = utility_matrix(market).values
    welfare = welfare_report(allocation, values)
    oracle = optimal_nsw_bruteforce(market)
    ratios, _ = explained_variance_ratios(summary.singular_values)
    sigma = summary.singular_values

    numbers = {
        "singular_values": sigma.tolist(),
        "v1": summary.right_vectors[:, 0].tolist(),
        "object_scores": trace.projected_object_scores.tolist(),
        "agent_scores": trace.projected_agent_scores.tolist(),
        "object_order": trace.object_order.tolist(),
        "agent_order": trace.agent_order.tolist(),
        "allocation": allocation.assignment.tolist(),
        "gains": welfare.gains.tolist(),
        "nsw": nsw_product(welfare.gains),
        "log_nsw": welfare.log_nsw_strict,
        "rho1": report.rho1,
        "effective_rank": report.effective_rank,
        "sigma_ratio": float(sigma[0] / sigma[1]),
        "band": report.band.value,
        "oracle_allocation": oracle.best_allocation.assignment.tolist(),
        "oracle_unique": oracle.unique,
    }

    def fmt(vector) -> str:
        return "(" + ", ".join(f"{v:.3f}" for v in vector) + ")"

    def order(indices, label: str) -> str:
        return " > ".join(f"{label}{i + 1}" for i in indices)

    lines = [
        "Features F (rows = products; quality, price value, brand):",
        *(f"  P{j + 1}: {fmt(row)}" for j, row in enumerate(market.features)),
        "Preferences W (rows = consumers):",
        *(f"  A{i + 1}: {fmt(row)}" for i, row in enumerate(market.preferences)),
        "Utilities U = W F^T:",
        *(f"  A{i + 1}: {fmt(row)}" for i, row in enumerate(values)),
        f"Singular values: {fmt(sigma)}",
        f"sigma1/sigma2 = {numbers['sigma_ratio']:.2f}",
        f"v1 = {fmt(numbers['v1'])} (largest entry made positive; the opposite sign is equally valid)",
        f"rho1 = {report.rho1:.3f}, per component {fmt(ratios)}, r_eff = {report.effective_rank:.3f}",
        f"Band: {report.band.value} ({report.band.recommendation})",
        f"Projected products: {fmt(numbers['object_scores'])}",
        f"Projected consumers: {fmt(numbers['agent_scores'])}",
        f"Product order: {order(trace.object_order, 'P')}",
        f"Consumer order: {order(trace.agent_order, 'A')}",
        "Allocation: " + ", ".join(f"A{i + 1}->P{j + 1}" for i, j in enumerate(allocation.assignment)),
        f"Gains over disagreement point: {fmt(welfare.gains)}",
        f"NSW = {numbers['nsw']:.2f}, log-NSW = {welfare.log_nsw_strict:.3f}",
        "Oracle over all {} allocations: {} ({})".format(
            oracle.enumerated_count,
            "same allocation" if oracle.best_allocation == allocation else "different allocation",
            "unique" if oracle.unique else "not unique",
        ),
    ]
    if math.isinf(welfare.log_nsw_strict):
        lines.append("Warning: some consumer is below the disagreement point")
    return "\n".join(lines) + "\n", numbers
