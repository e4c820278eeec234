import numpy as np
import pytest

from spectral_match.experiment_service import pedagogical_market as _pedagogical_market
from spectral_match.market_model import validate_market


@pytest.fixture
def pedagogical_market():
    return _pedagogical_market()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_market(rng, num_agents, num_objects, num_features, capacities=None):
    """Continuous random market; ties have probability zero."""

    features = rng.uniform(0.5, 10.0, size=(num_objects, num_features))
    preferences = rng.uniform(0.0, 10.0, size=(num_agents, num_features))
    if capacities is None:
        capacities = np.bincount(rng.integers(num_objects, size=num_agents), minlength=num_objects)
    return validate_market(features, preferences, capacities)


@pytest.fixture
def make_market():
    return random_market
