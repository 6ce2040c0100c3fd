"""
Least-squares parameter estimation from pairwise preference probabilities.

Empirical win probabilities of a group of rankings are mapped through a link
function (logit for Plackett-Luce, scaled probit for Thurstone) and the
utilities are recovered by least squares on the pairwise differences.
"""

import logging
import math
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.special import expit, logit, ndtr, ndtri

from app.config import get_settings
from app.schemas.estimation import PairwisePreferenceMatrix, TransformedMatrix
from app.schemas.ranking import PLParams, RankingDataset
from app.services.spectral_cluster import rank_positions

logger = logging.getLogger(__name__)

LinkKind = Literal["logit", "probit"]


def estimate_pairwise(
    dataset: RankingDataset, member_indices: Sequence[int]
) -> PairwisePreferenceMatrix:
    """
    Weighted fraction of member rankings placing i above j, for every pair.

    Args:
        dataset: Dataset of full rankings
        member_indices: Indices of the rankings to use

    Returns:
        PairwisePreferenceMatrix with diagonal 0.5 and P_ij + P_ji = 1

    Raises:
        ValueError: If the member set is empty or contains a partial ranking
    """
    member_indices = np.asarray(list(member_indices), dtype=int)
    if member_indices.size == 0:
        raise ValueError("cannot estimate preferences from an empty member set")
    if np.any(dataset.lengths[member_indices] != dataset.n):
        raise ValueError("pairwise estimation requires full rankings")

    n = dataset.n
    items = np.array([dataset.rankings[i].items for i in member_indices], dtype=int)
    weights = dataset.weights[member_indices]
    pos = rank_positions(items, n)

    upper = np.triu_indices(n, k=1)
    wins = weights @ (pos[:, upper[0]] < pos[:, upper[1]]).astype(float)
    total = float(weights.sum())

    probs = np.zeros((n, n))
    probs[upper] = wins / total
    probs[(upper[1], upper[0])] = 1.0 - probs[upper]
    np.fill_diagonal(probs, 0.5)
    return PairwisePreferenceMatrix(probs=probs, count=total)


def default_clamp(count: float) -> float:
    """Half a pseudo-count at the estimation resolution, kept inside [MIN_CLAMP, MAX_CLAMP]."""
    settings = get_settings()
    return min(max(1.0 / (2.0 * max(count, 1.0)), settings.MIN_CLAMP), settings.MAX_CLAMP)


def link_transform(
    P: PairwisePreferenceMatrix, link: LinkKind = "logit", clamp: Optional[float] = None
) -> TransformedMatrix:
    """
    Map preference probabilities to utility differences.

    Probabilities are clipped to [clamp, 1 - clamp]; logit gives ln(p / (1 - p)),
    probit gives √2·Φ⁻¹(p) (difference of two N(0, ½) noises has unit variance).
    Only the upper triangle is transformed; the lower one is its negation.
    """
    if clamp is None:
        clamp = default_clamp(P.count)
    if not 0.0 < clamp < 0.5:
        raise ValueError("clamp must lie in (0, 0.5)")

    n = P.n
    upper = np.triu_indices(n, k=1)
    p = np.clip(P.probs[upper], clamp, 1.0 - clamp)

    if link == "logit":
        values = logit(p)
    elif link == "probit":
        values = math.sqrt(2.0) * ndtri(p)
    else:
        raise ValueError(f"Unsupported link: {link}")

    phi = np.zeros((n, n))
    phi[upper] = values
    phi[(upper[1], upper[0])] = -values
    return TransformedMatrix(phi=phi)


def inverse_link(phi: np.ndarray, link: LinkKind = "logit") -> np.ndarray:
    """Map utility differences back to preference probabilities."""
    if link == "logit":
        return expit(phi)
    if link == "probit":
        return ndtr(np.asarray(phi) / math.sqrt(2.0))
    raise ValueError(f"Unsupported link: {link}")


def least_squares_fit(phi: TransformedMatrix) -> PLParams:
    """
    Mean-zero minimizer of Σ_{i≠j} (φ_ij - (θ_i - θ_j))².

    With skew-symmetric φ the normal equations reduce to
    θ_i = (1/n) Σ_{j≠i} φ_ij.
    """
    values = phi.phi
    if not np.all(np.isfinite(values)):
        raise ValueError("phi must be finite")

    n = values.shape[0]
    off = values.copy()
    np.fill_diagonal(off, 0.0)
    theta = off.sum(axis=1) / n
    return PLParams(theta=theta - theta.mean())


def fit_component(
    dataset: RankingDataset,
    member_indices: Sequence[int],
    link: LinkKind = "logit",
    clamp: Optional[float] = None,
) -> PLParams:
    """
    Fit one PL (or Thurstone) component from a group of rankings.

    Composition estimate_pairwise -> link_transform -> least_squares_fit.

    Example:
        >>> ds = RankingDataset.from_lists(2, [[0, 1], [0, 1], [1, 0]])
        >>> fit_component(ds, [0, 1, 2]).theta
        array([ 0.34657359, -0.34657359])
    """
    P = estimate_pairwise(dataset, member_indices)
    params = least_squares_fit(link_transform(P, link=link, clamp=clamp))
    logger.debug(f"Fitted component from {P.count:g} rankings with {link} link")
    return params
