"""Markets, linear utilities and allocation bookkeeping."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    CapacityMismatch,
    DimensionMismatch,
    EmptyMarket,
    InvalidAllocation,
    NonFiniteEntry,
)

LOGGER = logging.getLogger(__name__)


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Market:
    """Objects (feature rows), agents (reported weight rows) and capacities."""

    features: np.ndarray
    preferences: np.ndarray
    capacities: np.ndarray

    @property
    def num_agents(self) -> int:
        return int(self.preferences.shape[0])

    @property
    def num_objects(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def with_preferences(self, preferences: np.ndarray) -> "Market":
        return validate_market(self.features, preferences, self.capacities)


@dataclass(frozen=True, eq=False)
class UtilityMatrix:
    values: np.ndarray

    @property
    def num_agents(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_objects(self) -> int:
        return int(self.values.shape[1])


UtilityLike = Union[UtilityMatrix, np.ndarray]


def as_utility_values(utilities: UtilityLike) -> np.ndarray:
    if isinstance(utilities, UtilityMatrix):
        return utilities.values
    values = np.asarray(utilities, dtype=float)
    if values.ndim != 2:
        raise DimensionMismatch(f"utility matrix must be 2-D, got shape {values.shape}")
    return values


@dataclass(frozen=True, eq=False)
class Allocation:
    """Deterministic assignment; ``assignment[i]`` is the object of agent ``i``.

    The index vector is the canonical form, the 0/1 matrix is derived from it.
    """

    assignment: np.ndarray
    num_objects: int

    def __post_init__(self) -> None:
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.ndim != 1:
            raise InvalidAllocation("assignment must be a vector of object indices")
        if assignment.size and (assignment.min() < 0 or assignment.max() >= self.num_objects):
            raise InvalidAllocation(
                f"assignment references objects outside 0..{self.num_objects - 1}"
            )
        object.__setattr__(self, "assignment", _frozen(assignment.copy()))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Allocation":
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or not np.isin(matrix, (0, 1)).all():
            raise InvalidAllocation("allocation matrix must be a 2-D 0/1 matrix")
        if not (matrix.sum(axis=1) == 1).all():
            raise InvalidAllocation("every agent must receive exactly one object")
        return cls(np.argmax(matrix, axis=1), matrix.shape[1])

    @property
    def num_agents(self) -> int:
        return int(self.assignment.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        out = np.zeros((self.num_agents, self.num_objects), dtype=np.int64)
        out[np.arange(self.num_agents), self.assignment] = 1
        return out

    def column_sums(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_objects)

    def objects_of(self, agent: int) -> int:
        return int(self.assignment[agent])

    def validate(self, capacities: np.ndarray) -> "Allocation":
        capacities = np.asarray(capacities)
        if capacities.shape != (self.num_objects,):
            raise InvalidAllocation(
                f"allocation has {self.num_objects} objects, capacities has {capacities.shape[0]}"
            )
        sums = self.column_sums()
        if not np.array_equal(sums, capacities):
            bad = int(np.flatnonzero(sums != capacities)[0])
            raise InvalidAllocation(
                f"object {bad} receives {sums[bad]} agents but has capacity {capacities[bad]}"
            )
        return self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.num_objects == other.num_objects and np.array_equal(
            self.assignment, other.assignment
        )

    def __hash__(self) -> int:
        return hash((self.num_objects, self.assignment.tobytes()))


def validate_market(features, preferences, capacities) -> Market:
    features = np.array(features, dtype=float, ndmin=2)
    preferences = np.array(preferences, dtype=float, ndmin=2)
    capacities_raw = np.array(capacities, ndmin=1)

    if features.ndim != 2 or preferences.ndim != 2:
        raise DimensionMismatch("features and preferences must be 2-D matrices")
    if features.shape[0] == 0 or preferences.shape[0] == 0 or features.shape[1] == 0:
        raise EmptyMarket(
            f"market needs I >= 1, J >= 1, X >= 1; got I={preferences.shape[0]}, "
            f"J={features.shape[0]}, X={features.shape[1]}"
        )
    if features.shape[1] != preferences.shape[1]:
        raise DimensionMismatch(
            f"features have {features.shape[1]} columns, preferences have {preferences.shape[1]}"
        )
    if not np.isfinite(features).all():
        raise NonFiniteEntry("feature matrix contains NaN or infinite entries")
    if not np.isfinite(preferences).all():
        raise NonFiniteEntry("preference matrix contains NaN or infinite entries")
    if capacities_raw.ndim != 1 or capacities_raw.shape[0] != features.shape[0]:
        raise DimensionMismatch(
            f"expected {features.shape[0]} capacities, got {capacities_raw.size}"
        )
    as_float = capacities_raw.astype(float)
    if not np.isfinite(as_float).all() or not np.array_equal(as_float, np.round(as_float)):
        raise CapacityMismatch("capacities must be integers")
    caps = as_float.astype(np.int64)
    if (caps < 0).any():
        raise CapacityMismatch("capacities must be non-negative")
    if int(caps.sum()) != preferences.shape[0]:
        raise CapacityMismatch(
            f"sum of capacities {int(caps.sum())} != {preferences.shape[0]} agents"
        )
    return Market(_frozen(features), _frozen(preferences), _frozen(caps))


def even_capacities(num_agents: int, num_objects: int) -> np.ndarray:
    """Split ``num_agents`` seats over ``num_objects`` as evenly as possible."""

    base, extra = divmod(num_agents, num_objects)
    caps = np.full(num_objects, base, dtype=np.int64)
    caps[:extra] += 1
    return caps


def utility_matrix(market: Market) -> UtilityMatrix:
    return UtilityMatrix(_frozen(market.preferences @ market.features.T))


def disagreement_points(utilities: UtilityLike) -> np.ndarray:
    # Uniform over all J objects; capacities are not weighted in.
    return as_utility_values(utilities).mean(axis=1)


GAIN_TOLERANCE = 1e-12


def gains_over_disagreement(utilities: UtilityLike, realized: np.ndarray) -> np.ndarray:
    """``realized - o`` with rounding-level differences snapped to exactly zero.

    ``realized`` is either one utility per agent or a full I x J matrix.
    """

    points = disagreement_points(utilities)
    realized = np.asarray(realized, dtype=float)
    if realized.ndim == 2:
        points = points[:, None]
    gains = realized - points
    tolerance = GAIN_TOLERANCE * np.maximum(1.0, np.abs(points))
    return np.where(np.abs(gains) <= tolerance, 0.0, gains)


def expected_random_utilities(utilities: UtilityLike, capacities) -> np.ndarray:
    """Expected utility per agent under a uniformly random feasible assignment."""

    values = as_utility_values(utilities)
    caps = np.asarray(capacities, dtype=float)
    return values @ (caps / caps.sum())


def realized_utilities(allocation: Allocation, utilities: UtilityLike) -> np.ndarray:
    values = as_utility_values(utilities)
    if values.shape != (allocation.num_agents, allocation.num_objects):
        raise DimensionMismatch(
            f"allocation is {allocation.num_agents}x{allocation.num_objects}, "
            f"utilities are {values.shape[0]}x{values.shape[1]}"
        )
    return values[np.arange(allocation.num_agents), allocation.assignment]
