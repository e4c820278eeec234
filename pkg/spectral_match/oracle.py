"""Exact small-instance NSW maximizer and the greedy log-NSW upper bound."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatch, OracleTooLarge
from .market_model import (
    Allocation,
    Market,
    UtilityLike,
    as_utility_values,
    gains_over_disagreement,
    utility_matrix,
)
from .welfare import DEFAULT_EPSILON, check_epsilon

LOGGER = logging.getLogger(__name__)

DEFAULT_BUDGET = 10_000_000
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class OracleResult:
    best_allocation: Allocation
    best_log_nsw: float
    unique: bool
    enumerated_count: int
    nodes_visited: int = 0


def feasible_count(capacities) -> int:
    """Number of distinct capacity-feasible deterministic allocations."""

    caps = [int(c) for c in np.asarray(capacities).ravel()]
    count = math.factorial(sum(caps))
    for cap in caps:
        count //= math.factorial(cap)
    return count


def _first_feasible(capacities: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(capacities.size), capacities)


def _branch_and_bound(log_gains: np.ndarray, capacities: np.ndarray) -> tuple:
    """Iterative depth-first search; ``cursor[d]`` is the next object agent ``d`` tries."""

    num_agents, num_objects = log_gains.shape
    best_per_agent = log_gains.max(axis=1)
    suffix = np.concatenate([np.cumsum(best_per_agent[::-1])[::-1], [0.0]])
    best, assignment, unique, nodes = -math.inf, None, False, 0
    if not np.isfinite(suffix[0]):
        return best, assignment, unique, nodes

    remaining = capacities.copy()
    current = np.empty(num_agents, dtype=np.int64)
    cursor = np.zeros(num_agents + 1, dtype=np.int64)
    partial = np.zeros(num_agents + 1)
    agent = 0
    nodes = 1
    while agent >= 0:
        if agent == num_agents:
            total = partial[agent]
            if total > best + TIE_TOLERANCE:
                best, assignment, unique = total, current.copy(), True
            elif abs(total - best) <= TIE_TOLERANCE:
                unique = False
            agent -= 1
            remaining[current[agent]] += 1
            continue
        obj = int(cursor[agent])
        while obj < num_objects:
            gain = log_gains[agent, obj]
            if (
                remaining[obj] > 0
                and gain != -np.inf
                and partial[agent] + gain + suffix[agent + 1] >= best - TIE_TOLERANCE
            ):
                break
            obj += 1
        if obj == num_objects:
            agent -= 1
            if agent >= 0:
                remaining[current[agent]] += 1
            continue
        cursor[agent] = obj + 1
        remaining[obj] -= 1
        current[agent] = obj
        partial[agent + 1] = partial[agent] + log_gains[agent, obj]
        agent += 1
        cursor[agent] = 0
        nodes += 1
    return best, assignment, unique, nodes


def optimal_nsw_bruteforce(
    market_or_utilities: Union[Market, UtilityLike],
    capacities=None,
    *,
    budget: int = DEFAULT_BUDGET,
) -> OracleResult:
    """Maximize strict NSW by depth-first branch and bound.

    Agents are assigned in index order and objects tried in index order, so
    the first maximizer found is the lexicographically smallest one. A branch
    is cut when its partial log-NSW plus every remaining agent's best log gain
    falls below the incumbent.
    """

    if isinstance(market_or_utilities, Market):
        values = utility_matrix(market_or_utilities).values
        caps = market_or_utilities.capacities
    else:
        values = as_utility_values(market_or_utilities)
        if capacities is None:
            if values.shape[0] != values.shape[1]:
                raise DimensionMismatch("capacities are required unless I == J")
            capacities = np.ones(values.shape[1], dtype=np.int64)
        caps = np.asarray(capacities, dtype=np.int64)
        if caps.shape != (values.shape[1],) or int(caps.sum()) != values.shape[0]:
            raise DimensionMismatch("capacities must have one entry per object and sum to I")

    num_objects = values.shape[1]
    enumerated = feasible_count(caps)
    if enumerated > budget:
        raise OracleTooLarge(
            f"{enumerated} feasible allocations exceed the enumeration budget {budget}"
        )

    gains = gains_over_disagreement(values, values)
    with np.errstate(divide="ignore"):
        log_gains = np.where(gains > 0, np.log(np.where(gains > 0, gains, 1.0)), -np.inf)
    best, assignment, unique, nodes = _branch_and_bound(log_gains, caps)
    LOGGER.debug("Oracle visited %s nodes of %s allocations", nodes, enumerated)

    if assignment is None:
        LOGGER.warning("No allocation gives every agent a positive gain; strict NSW is zero")
        return OracleResult(
            Allocation(_first_feasible(caps), num_objects), -math.inf, False, enumerated, nodes
        )
    return OracleResult(Allocation(assignment, num_objects), float(best), bool(unique), enumerated, nodes)


def greedy_log_nsw_upper_bound(utilities: UtilityLike, epsilon: float = DEFAULT_EPSILON) -> float:
    """Every agent gets its best object, capacities ignored, gains floored at epsilon."""

    check_epsilon(epsilon)
    values = as_utility_values(utilities)
    best = gains_over_disagreement(values, values.max(axis=1))
    return float(np.log(np.maximum(best, epsilon)).sum())


def try_oracle(market: Market, budget: int = DEFAULT_BUDGET) -> Optional[OracleResult]:
    try:
        return optimal_nsw_bruteforce(market, budget=budget)
    except OracleTooLarge as exc:
        LOGGER.warning("Skipping oracle: %s", exc)
        return None
