"""
Pytest configuration and shared fixtures.

Provides seeded random generators, small hand-built datasets and a
well-separated two-component mixture used across the test modules.
"""

import numpy as np
import pytest

from app.config import get_settings
from app.schemas.ranking import MixtureParams, RankingDataset
from app.services.synthetic import sample_mixture


@pytest.fixture(autouse=True)
def fresh_settings():
    """Reload settings for every test so environment overrides do not leak."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def symmetric_dataset():
    """Two opposite rankings over two items."""
    return RankingDataset.from_lists(2, [[0, 1], [1, 0]])


@pytest.fixture
def small_dataset():
    """A handful of full rankings over four items with a connected comparison graph."""
    return RankingDataset.from_lists(
        4,
        [
            [0, 1, 2, 3],
            [1, 0, 3, 2],
            [0, 2, 1, 3],
            [3, 2, 1, 0],
            [2, 0, 3, 1],
            [1, 3, 0, 2],
        ],
        multiplicities=[3, 1, 2, 1, 1, 2],
    )


@pytest.fixture
def separated_mixture():
    """Two components that order eight items in opposite directions."""
    base = np.linspace(2.5, -2.5, 8)
    return MixtureParams(thetas=np.column_stack([base, -base]), beta=[0.5, 0.5])


@pytest.fixture
def separated_sample(separated_mixture):
    """300 rankings drawn from the separated mixture, with their true labels."""
    return sample_mixture(separated_mixture, 300, np.random.default_rng(7))
