"""
Plackett-Luce likelihoods and random-utility sampling.

Likelihoods use suffix log-sum-exp so they stay finite for large utilities.
Samplers draw a ranking by sorting perturbed utilities (the Gumbel trick for
Plackett-Luce, Gaussian noise for Thurstone).
"""

import logging
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from app.schemas.ranking import MixtureParams, PLParams, Ranking, RankingDataset

logger = logging.getLogger(__name__)

NoiseKind = Literal["gumbel", "normal_halfvar"]

UNIFORM_FLOOR = 1e-300


def _choice_log_likelihoods(utilities: np.ndarray) -> np.ndarray:
    """
    Log-likelihood of each row of ranked utilities.

    Args:
        utilities: r x s matrix; row l holds theta of ranking l's items, best first

    Returns:
        Length-r vector of Σ_{i<s} [u_i - log Σ_{j>=i} exp(u_j)]
    """
    suffix_lse = np.logaddexp.accumulate(utilities[:, ::-1], axis=1)[:, ::-1]
    return (utilities - suffix_lse)[:, :-1].sum(axis=1)


def pl_log_likelihood(ranking: Ranking, params: PLParams) -> float:
    """
    Log-probability of a (possibly partial) ranking under a PL model.

    For a ranking of s items only the s-1 observed choices contribute, and the
    choice sets are suffixes of the listed items (unlisted items never enter).

    Args:
        ranking: Ranking to evaluate
        params: PL utilities

    Returns:
        log P(ranking | theta)

    Example:
        >>> pl_log_likelihood(Ranking(items=(0, 1)), PLParams(theta=[np.log(2), 0.0]))
        -0.405...  # log(2/3)
    """
    if max(ranking.items) >= params.n:
        raise ValueError("ranking refers to an item outside the parameter vector")
    utilities = params.theta[np.asarray(ranking.items)][None, :]
    return float(_choice_log_likelihoods(utilities)[0])


def ranking_log_likelihoods(dataset: RankingDataset, theta: np.ndarray) -> np.ndarray:
    """Per-ranking PL log-likelihoods (multiplicities not applied)."""
    out = np.empty(dataset.num_rankings)
    for indices, items in dataset.length_groups.values():
        out[indices] = _choice_log_likelihoods(theta[items])
    return out


def component_log_likelihoods(dataset: RankingDataset, mix: MixtureParams) -> np.ndarray:
    """m x K matrix of per-ranking log-likelihoods under every component."""
    return np.column_stack(
        [ranking_log_likelihoods(dataset, mix.thetas[:, k]) for k in range(mix.K)]
    )


def dataset_log_likelihood(dataset: RankingDataset, params: PLParams) -> float:
    """Multiplicity-weighted log-likelihood of a dataset under one PL model."""
    return float(dataset.weights @ ranking_log_likelihoods(dataset, params.theta))


def mixture_log_likelihood(dataset: RankingDataset, mix: MixtureParams) -> float:
    """
    Marginal log-likelihood Σ_l mult_l · log Σ_k β_k P(π_l | θ^k).

    Args:
        dataset: Rankings with multiplicities
        mix: Mixture parameters

    Returns:
        The marginal log-likelihood (log-sum-exp stabilized)
    """
    if mix.n != dataset.n:
        raise ValueError(f"mixture has n={mix.n} items but dataset has n={dataset.n}")
    per_component = component_log_likelihoods(dataset, mix)
    with np.errstate(divide="ignore"):
        log_beta = np.log(mix.beta)
    per_ranking = logsumexp(per_component + log_beta[None, :], axis=1)
    return float(dataset.weights @ per_ranking)


def gumbel_noise(rng: np.random.Generator, size) -> np.ndarray:
    """Standard Gumbel draws via -log(-log U), with U clamped away from 0."""
    u = np.clip(rng.random(size), UNIFORM_FLOOR, 1.0)
    return -np.log(-np.log(u))


def _noise(noise: NoiseKind, rng: np.random.Generator, size) -> np.ndarray:
    if noise == "gumbel":
        return gumbel_noise(rng, size)
    if noise == "normal_halfvar":
        return rng.normal(0.0, np.sqrt(0.5), size)
    raise ValueError(f"Unsupported noise distribution: {noise}")


def sample_orders(
    theta: np.ndarray, count: int, rng: np.random.Generator, noise: NoiseKind = "gumbel"
) -> np.ndarray:
    """
    Draw ``count`` full rankings of a random utility model at once.

    Returns:
        count x n integer matrix, each row an argsort of theta + noise, descending
    """
    utilities = theta[None, :] + _noise(noise, rng, (count, theta.size))
    return np.argsort(-utilities, axis=1, kind="stable")


def sample_rum(params: PLParams, noise: NoiseKind, rng: np.random.Generator) -> Ranking:
    """Draw one ranking from an IID random utility model with the given noise law."""
    order = sample_orders(params.theta, 1, rng, noise=noise)[0]
    return Ranking(items=tuple(order.tolist()))


def sample_pl(params: PLParams, rng: np.random.Generator) -> Ranking:
    """Draw one ranking from a Plackett-Luce model (Gumbel-perturbed argsort)."""
    return sample_rum(params, "gumbel", rng)
