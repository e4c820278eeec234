import itertools
import math

import numpy as np
import pytest

from spectral_match.errors import DimensionMismatch, OracleTooLarge
from spectral_match.market_model import Allocation, utility_matrix, validate_market
from spectral_match.mechanism import svd_match
from spectral_match.oracle import (
    feasible_count,
    greedy_log_nsw_upper_bound,
    optimal_nsw_bruteforce,
    try_oracle,
)
from spectral_match.welfare import welfare_report


def _exhaustive_best(values, capacities):
    slots = np.repeat(np.arange(len(capacities)), capacities).tolist()
    best = -math.inf
    for order in set(itertools.permutations(slots)):
        report = welfare_report(Allocation(np.array(order), len(capacities)), values)
        best = max(best, report.log_nsw_strict)
    return best


def test_worked_example_optimum(pedagogical_market):
    result = optimal_nsw_bruteforce(pedagogical_market)
    assert result.best_allocation.assignment.tolist() == [0, 1, 2]
    assert result.unique
    assert result.enumerated_count == 6
    assert math.exp(result.best_log_nsw) == pytest.approx(2664.44, rel=5e-3)
    assert result.best_allocation == svd_match(pedagogical_market)[0]


def test_diagonal_utilities():
    result = optimal_nsw_bruteforce(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert result.best_allocation.assignment.tolist() == [0, 1]
    assert result.unique
    assert result.best_log_nsw == pytest.approx(2 * math.log(0.5))


@pytest.mark.parametrize("trial", range(8))
def test_matches_exhaustive_enumeration(trial):
    rng = np.random.default_rng(trial)
    market = validate_market(rng.uniform(0, 10, (3, 3)), rng.uniform(0, 10, (6, 3)), [2, 2, 2])
    values = utility_matrix(market).values
    result = optimal_nsw_bruteforce(market)
    best = _exhaustive_best(values, [2, 2, 2])
    if math.isinf(best):
        assert result.best_log_nsw == -math.inf
        assert not result.unique
    else:
        assert result.best_log_nsw == pytest.approx(best, abs=1e-9)
        assert welfare_report(result.best_allocation, values).log_nsw_strict == pytest.approx(best, abs=1e-9)
    result.best_allocation.validate(market.capacities)


def test_no_positive_allocation_returns_first_feasible():
    result = optimal_nsw_bruteforce(np.full((3, 2), 5.0), [2, 1])
    assert result.best_log_nsw == -math.inf
    assert result.best_allocation.assignment.tolist() == [0, 0, 1]
    assert not result.unique


def test_feasible_count():
    assert feasible_count([2, 2, 2]) == 90
    assert feasible_count([1, 1, 1]) == 6
    assert feasible_count([3, 0]) == 1


def test_capacities_required_for_rectangular_input():
    with pytest.raises(DimensionMismatch):
        optimal_nsw_bruteforce(np.ones((3, 2)))


def test_budget_guard():
    market = validate_market(np.eye(12), np.eye(12), np.ones(12, dtype=int))
    with pytest.raises(OracleTooLarge):
        optimal_nsw_bruteforce(market)
    assert try_oracle(market) is None


def test_greedy_bound_on_worked_example(pedagogical_market):
    values = utility_matrix(pedagogical_market)
    assert greedy_log_nsw_upper_bound(values) == pytest.approx(7.888, abs=1e-3)


def test_greedy_bound_with_one_object():
    assert greedy_log_nsw_upper_bound(np.array([[3.0], [7.0]]), epsilon=0.01) == pytest.approx(2 * math.log(0.01))


def test_greedy_bound_dominates_the_optimum():
    for trial in range(10):
        rng = np.random.default_rng(50 + trial)
        values = rng.uniform(0, 10, (5, 5))
        result = optimal_nsw_bruteforce(values)
        assert greedy_log_nsw_upper_bound(values) >= welfare_report(result.best_allocation, values).log_nsw_clipped - 1e-9


def test_deep_market_with_few_allocations():
    num_agents = 1500
    preferences = np.tile([1.0, 0.0], (num_agents, 1))
    preferences[0] = [0.0, 1.0]
    market = validate_market(np.eye(2), preferences, [num_agents - 1, 1])
    result = try_oracle(market)
    assert result is not None
    assert result.enumerated_count == num_agents
    assert result.best_allocation.assignment.tolist() == [1] + [0] * (num_agents - 1)
    assert result.best_log_nsw == pytest.approx(num_agents * math.log(0.5))
    assert result.unique
