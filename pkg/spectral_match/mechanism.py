"""Spectral matching, its rank-2 variant, IR repair and baseline mechanisms."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, InvalidAllocation
from .market_model import (
    Allocation,
    Market,
    UtilityLike,
    as_utility_values,
    gains_over_disagreement,
    realized_utilities,
    utility_matrix,
)
from .oracle import optimal_nsw_bruteforce
from .spectral import DiagnosticReport, SpectralSummary, diagnose_summary, principal_direction, project, svd
from .timing import PhaseTimer, timed

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MatchTrace:
    """Audit trail of one sorted matching: scores, both orders and the slot list."""

    object_order: np.ndarray
    agent_order: np.ndarray
    projected_object_scores: np.ndarray
    projected_agent_scores: np.ndarray
    slot_objects: np.ndarray


def descending_order(scores: np.ndarray) -> np.ndarray:
    """Stable descending order; equal scores keep ascending index order."""

    scores = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(scores.size), -scores))


def match_projected(
    market: Market,
    direction: np.ndarray,
    timer: Optional[PhaseTimer] = None,
) -> tuple[Allocation, MatchTrace]:
    with timed(timer, "projection"):
        object_scores = project(market.features, direction)
        agent_scores = project(market.preferences, direction)
    with timed(timer, "sort"):
        object_order = descending_order(object_scores)
        agent_order = descending_order(agent_scores)
    with timed(timer, "match"):
        slots = np.repeat(object_order, market.capacities[object_order])
        assignment = np.empty(market.num_agents, dtype=np.int64)
        assignment[agent_order] = slots
        allocation = Allocation(assignment, market.num_objects)
    trace = MatchTrace(object_order, agent_order, object_scores, agent_scores, slots)
    return allocation, trace


def svd_match(
    market: Market,
    timer: Optional[PhaseTimer] = None,
) -> tuple[Allocation, MatchTrace, DiagnosticReport]:
    """Sort agents and objects on the principal feature direction and zip them.

    Raises ``DegenerateSpectrum`` for an all-zero feature matrix; callers
    should fall back to ``random_priority`` in that case.
    """

    with timed(timer, "decomposition"):
        summary = svd(market.features)
        direction = principal_direction(summary)
    report = diagnose_summary(summary)
    allocation, trace = match_projected(market, direction, timer)
    LOGGER.debug(
        "svd_match: I=%s J=%s X=%s rho1=%.4f band=%s",
        market.num_agents,
        market.num_objects,
        market.num_features,
        report.rho1,
        report.band.value,
    )
    return allocation, trace, report


def projected_total(trace: MatchTrace, allocation: Allocation) -> float:
    return float(
        np.sum(trace.projected_agent_scores * trace.projected_object_scores[allocation.assignment])
    )


def rank2_surrogate(market: Market, summary: SpectralSummary) -> np.ndarray:
    """``(w.v1)(f.v1) + (w.v2)(f.v2)`` for every agent/object pair."""

    if summary.num_features < 2:
        raise DimensionMismatch("the rank-2 variant needs at least two features")
    out = np.zeros((market.num_agents, market.num_objects))
    for col in range(2):
        direction = summary.right_vectors[:, col]
        out += np.outer(project(market.preferences, direction), project(market.features, direction))
    return out


def surrogate_total(allocation: Allocation, surrogate: np.ndarray) -> float:
    return float(surrogate[np.arange(allocation.num_agents), allocation.assignment].sum())


def svd_match_2d(market: Market) -> Allocation:
    """Exact optimum of the rank-2 surrogate over capacity-feasible assignments."""

    summary = svd(market.features)
    principal_direction(summary)
    surrogate = rank2_surrogate(market, summary)
    slots = np.repeat(np.arange(market.num_objects), market.capacities)
    rows, cols = linear_sum_assignment(surrogate[:, slots], maximize=True)
    assignment = np.empty(market.num_agents, dtype=np.int64)
    assignment[rows] = slots[cols]
    return Allocation(assignment, market.num_objects)


def ir_repair(
    allocation: Allocation,
    utilities: UtilityLike,
    rng: np.random.Generator,
) -> Allocation:
    """Shuffle the objects held by agents strictly below their disagreement point.

    Only violators move, and they only trade among the slots they free, so
    column sums are unchanged.
    """

    values = as_utility_values(utilities)
    gains = gains_over_disagreement(values, realized_utilities(allocation, values))
    violators = np.flatnonzero(gains < 0)
    if violators.size == 0:
        return allocation
    LOGGER.warning("Repairing %s IR violations by random reassignment", violators.size)
    assignment = allocation.assignment.copy()
    assignment[violators] = rng.permutation(assignment[violators])
    return Allocation(assignment, allocation.num_objects)


def random_priority(market: Market, rng: np.random.Generator) -> Allocation:
    remaining = market.capacities.copy()
    assignment = np.empty(market.num_agents, dtype=np.int64)
    for agent in rng.permutation(market.num_agents):
        available = np.flatnonzero(remaining > 0)
        choice = available[rng.integers(available.size)]
        remaining[choice] -= 1
        assignment[agent] = choice
    return Allocation(assignment, market.num_objects)


def serial_dictatorship(market: Market, agent_order: Optional[Sequence[int]] = None) -> Allocation:
    values = utility_matrix(market).values
    if agent_order is None:
        order = np.arange(market.num_agents)
    else:
        order = np.asarray(agent_order, dtype=np.int64)
        if not np.array_equal(np.sort(order), np.arange(market.num_agents)):
            raise InvalidAllocation("agent_order must be a permutation of the agents")
    remaining = market.capacities.copy()
    assignment = np.empty(market.num_agents, dtype=np.int64)
    for agent in order:
        # argmax keeps the lowest object index among equal utilities
        choice = int(np.argmax(np.where(remaining > 0, values[agent], -np.inf)))
        remaining[choice] -= 1
        assignment[agent] = choice
    return Allocation(assignment, market.num_objects)


def _oracle(market: Market, rng: np.random.Generator) -> Allocation:
    return optimal_nsw_bruteforce(market).best_allocation


Mechanism = Callable[[Market, np.random.Generator], Allocation]

MECHANISMS: Dict[str, Mechanism] = {
    "svd": lambda market, rng: svd_match(market)[0],
    "svd2d": lambda market, rng: svd_match_2d(market),
    "random": random_priority,
    "serial": lambda market, rng: serial_dictatorship(market),
    "oracle": _oracle,
}
