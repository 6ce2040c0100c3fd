"""
Synthetic data for mixtures of Plackett-Luce models.

The top-L generator draws the first L utilities of every component from a
standard normal and pins the remaining n - L items at zero, so components differ
only in how they order a few "informative" items.
"""

import logging
from typing import Tuple

import numpy as np

from app.schemas.ranking import MixtureParams, RankingDataset
from app.services.pl_model import NoiseKind, sample_orders

logger = logging.getLogger(__name__)


def generate_top_L(n: int, L: int, K: int, rng: np.random.Generator) -> MixtureParams:
    """
    Draw mixture parameters from the top-L generative model with uniform β.

    Args:
        n: Number of items
        L: Number of informative items (1 <= L <= n)
        K: Number of components
        rng: Random generator

    Returns:
        MixtureParams whose columns are stored mean-centered

    Raises:
        ValueError: If L is outside [1, n] or K < 1
    """
    if not 1 <= L <= n:
        raise ValueError(f"L must lie in [1, n={n}], got {L}")
    if K < 1:
        raise ValueError("K must be at least 1")

    thetas = np.zeros((n, K))
    thetas[:L, :] = rng.standard_normal((L, K))
    return MixtureParams(thetas=thetas, beta=np.full(K, 1.0 / K))


def sample_mixture(
    mix: MixtureParams,
    m: int,
    rng: np.random.Generator,
    noise: NoiseKind = "gumbel",
) -> Tuple[RankingDataset, np.ndarray]:
    """
    Sample m full rankings from a mixture together with their true labels.

    Labels are i.i.d. Categorical(β); ranking l is drawn from component z_l.

    Returns:
        (dataset, labels) with labels a length-m integer vector in [0, K)
    """
    if m < 1:
        raise ValueError("m must be at least 1")

    labels = rng.choice(mix.K, size=m, p=mix.beta)
    orders = np.empty((m, mix.n), dtype=int)
    for k in range(mix.K):
        members = np.flatnonzero(labels == k)
        if members.size:
            orders[members] = sample_orders(mix.thetas[:, k], members.size, rng, noise=noise)

    dataset = RankingDataset.from_lists(mix.n, orders.tolist())
    logger.info(f"Sampled {m} rankings from a {mix.K}-component mixture over {mix.n} items")
    return dataset, labels


def truncate_rankings(dataset: RankingDataset, s: int) -> RankingDataset:
    """Keep the top-s prefix of every ranking (rankings shorter than s are kept whole)."""
    if s < 2:
        raise ValueError("partial rankings need at least two items")
    return RankingDataset.from_lists(
        dataset.n,
        [r.items[:s] for r in dataset.rankings],
        multiplicities=dataset.multiplicities,
        item_names=dataset.item_names,
    )
