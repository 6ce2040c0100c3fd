"""
Spectral clustering of rankings with adaptive dimension reduction.

Rankings are embedded as binary pairwise-preference vectors, projected onto the
leading right singular vectors (the projection rank is picked from the gaps of
the singular values) and clustered with k-means.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from app.config import get_settings
from app.exceptions import EmbeddingError
from app.schemas.estimation import ClusterAssignment, KMeansResult, SvdFactors
from app.schemas.ranking import RankingDataset

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-9


def rank_positions(items: np.ndarray, n: int) -> np.ndarray:
    """Invert orders: ``pos[l, i]`` is the rank of item i in ranking l (0 = best)."""
    pos = np.empty_like(items)
    rows = np.arange(items.shape[0])[:, None]
    pos[rows, items] = np.arange(items.shape[1])[None, :]
    return pos


def embed_pairwise(
    dataset: RankingDataset, return_sources: bool = False
) -> np.ndarray | Tuple[np.ndarray, np.ndarray]:
    """
    Embed full rankings into binary vectors over item pairs.

    Column d corresponds to the pair (d1, d2), d1 < d2, in row-major order
    (0,1), (0,2), ..., (n-2, n-1); the entry is 1 when d1 is ranked above d2.
    Rankings with integer multiplicity c are repeated c times; a fractional
    multiplicity contributes a single row carrying that multiplicity as its
    weight (see ``row_weights``).

    Args:
        dataset: Dataset of full rankings
        return_sources: Also return the ranking index of every row

    Returns:
        m x C(n, 2) float matrix (and optionally the row-to-ranking map)

    Raises:
        EmbeddingError: If any ranking is partial

    Example:
        n = 4, π = [1, 3, 0, 2] embeds as (0, 1, 0, 1, 1, 0).
    """
    if not dataset.is_full:
        raise EmbeddingError("embedding requires full rankings")

    n = dataset.n
    items = np.array([r.items for r in dataset.rankings], dtype=int)
    pos = rank_positions(items, n)
    d1, d2 = np.triu_indices(n, k=1)
    rows = (pos[:, d1] < pos[:, d2]).astype(float)

    sources = np.repeat(np.arange(dataset.num_rankings), _row_repeats(dataset.weights))
    X = rows[sources]
    if return_sources:
        return X, sources
    return X


def _row_repeats(weights: np.ndarray) -> np.ndarray:
    integral = np.isclose(weights, np.round(weights)) & (weights >= 1)
    return np.where(integral, np.round(weights), 1).astype(int)


def row_weights(dataset: RankingDataset, sources: np.ndarray) -> np.ndarray:
    """
    Weight of every embedding row, summing to the total multiplicity m.

    Repeated rows weigh 1 each; the single row of a fractional multiplicity c
    weighs c, so a tie expanded into many orders keeps its share of the data.
    """
    weights = dataset.weights
    return (weights / _row_repeats(weights))[sources]


def default_threshold(n: int, m: float) -> float:
    """Spectral-gap threshold T = √n · √(m + n) · √(ln n)."""
    if n < 2:
        raise ValueError("default_threshold requires n >= 2")
    return math.sqrt(n) * math.sqrt(m + n) * math.sqrt(math.log(n))


def compute_svd(X: np.ndarray, rank: int) -> SvdFactors:
    """
    Leading ``rank`` singular values and right singular vectors of X.

    Uses a thin SVD when the embedding dimension is at most ``SVD_DIRECT_MAX_DIM``;
    otherwise eigen-decomposes the smaller Gram matrix. Values below
    ``SINGULAR_VALUE_RTOL · S_1`` are set to zero and padded with zeros up to
    ``rank``.
    """
    settings = get_settings()
    p, dim = X.shape

    if dim <= settings.SVD_DIRECT_MAX_DIM:
        _, S, Vt = scipy.linalg.svd(X, full_matrices=False)
        S, V = S[:rank], Vt[:rank].T
    elif p <= dim:
        top = min(rank, p)
        evals, U = scipy.linalg.eigh(X @ X.T, subset_by_index=[p - top, p - 1])
        evals, U = evals[::-1], U[:, ::-1]
        S = np.sqrt(np.clip(evals, 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            V = np.where(S > 0, (X.T @ U) / S, 0.0)
    else:
        top = min(rank, dim)
        evals, V = scipy.linalg.eigh(X.T @ X, subset_by_index=[dim - top, dim - 1])
        S, V = np.sqrt(np.clip(evals[::-1], 0.0, None)), V[:, ::-1]

    if S.size and S[0] > 0:
        small = S < settings.SINGULAR_VALUE_RTOL * S[0]
        S = np.where(small, 0.0, S)
        V = np.where(small[None, :], 0.0, V)

    if S.size < rank:
        S = np.concatenate([S, np.zeros(rank - S.size)])
        V = np.hstack([V, np.zeros((dim, rank - V.shape[1]))])
    return SvdFactors(singular_values=S, right_vectors=V)


def select_rank(singular_values: np.ndarray, K: int, T: float) -> int:
    """
    Pick the projection rank from the singular-value gaps.

    Returns the largest a in [1, K] with S_a - S_{a+1} >= T, or K when no gap
    reaches the threshold.
    """
    S = np.asarray(singular_values, dtype=float)
    if S.size < K + 1:
        S = np.concatenate([S, np.zeros(K + 1 - S.size)])
    gaps = S[:K] - S[1 : K + 1]
    qualifying = np.flatnonzero(gaps >= T)
    if qualifying.size == 0:
        logger.warning(f"No singular-value gap reaches T={T:.3f}; projecting on rank {K}")
        return K
    return int(qualifying[-1]) + 1


def _lloyd(
    points: np.ndarray, centers: np.ndarray, weights: np.ndarray, max_iter: int
) -> Tuple[np.ndarray, np.ndarray, list]:
    """One weighted k-means run from the given centers; returns labels, centers, history."""
    K = centers.shape[0]
    labels = None
    history = []
    for _ in range(max_iter):
        d2 = cdist(points, centers, "sqeuclidean")
        new_labels = np.argmin(d2, axis=1)

        # Repair empty clusters by stealing the point farthest from its center
        for k in range(K):
            if np.any(new_labels == k):
                continue
            cost = d2[np.arange(points.shape[0]), new_labels]
            sizes = np.bincount(new_labels, minlength=K)
            cost[sizes[new_labels] <= 1] = -np.inf
            victim = int(np.argmax(cost))
            logger.debug(f"Empty k-means cluster {k} repaired with point {victim}")
            new_labels[victim] = k

        centers = np.vstack(
            [
                np.average(points[new_labels == k], axis=0, weights=weights[new_labels == k])
                for k in range(K)
            ]
        )
        objective = float(weights @ ((points - centers[new_labels]) ** 2).sum(axis=1))
        history.append(objective)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return new_labels, centers, history


def kmeans(
    points: np.ndarray,
    K: int,
    rng: np.random.Generator,
    restarts: Optional[int] = None,
    max_iter: Optional[int] = None,
    sample_weight: Optional[np.ndarray] = None,
) -> KMeansResult:
    """
    Lloyd's k-means with greedy k-means++ seeding, best of several restarts.

    Args:
        points: p x r data matrix
        K: Number of clusters
        rng: Random generator (one seed drawn per restart)
        restarts: Number of restarts (default KMEANS_RESTARTS)
        max_iter: Lloyd iterations per restart (default KMEANS_MAX_ITER)
        sample_weight: Positive per-point weights (default all ones); centers are
            weighted means and the objective is the weighted within-cluster scatter

    Returns:
        KMeansResult of the restart with the lowest objective (ties: lowest index)

    Raises:
        ValueError: If there are fewer points than clusters or a weight is not positive
    """
    settings = get_settings()
    restarts = restarts or settings.KMEANS_RESTARTS
    max_iter = max_iter or settings.KMEANS_MAX_ITER

    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] < K:
        raise ValueError(f"k-means needs at least K={K} points, got {points.shape[0]}")
    if sample_weight is None:
        weights = np.ones(points.shape[0])
    else:
        weights = np.asarray(sample_weight, dtype=float)
        if weights.shape != (points.shape[0],) or np.any(weights <= 0):
            raise ValueError("sample_weight must hold one positive weight per point")

    seeds = rng.integers(0, 2**31 - 1, size=restarts)
    best: Optional[KMeansResult] = None
    for seed in seeds:
        init, _ = kmeans_plusplus(
            points, n_clusters=K, sample_weight=weights, random_state=int(seed)
        )
        labels, centers, history = _lloyd(points, init, weights, max_iter)
        if best is None or history[-1] < best.objective:
            best = KMeansResult(
                labels=labels, centers=centers, objective=history[-1], history=history
            )
    return best


def spectral_cluster(
    X: np.ndarray,
    K: int,
    T: float,
    rng: np.random.Generator,
    sample_weight: Optional[np.ndarray] = None,
) -> ClusterAssignment:
    """
    Spectral clustering with adaptive dimension reduction.

    With ``sample_weight`` the singular vectors are those of diag(√w)·X and
    k-means weighs every row by w, so a row of weight c counts like c repeats.

    Args:
        X: m x C(n, 2) pairwise embedding
        K: Number of clusters
        T: Singular-value gap threshold
        rng: Random generator
        sample_weight: Optional positive row weights (see ``row_weights``)

    Returns:
        ClusterAssignment with labels per row of X and the selected rank r̂
    """
    if X.shape[0] < K:
        raise ValueError(f"spectral clustering needs at least K={K} rows, got {X.shape[0]}")

    scaled = X if sample_weight is None else np.sqrt(sample_weight)[:, None] * X
    factors = compute_svd(scaled, K + 1)
    r_hat = select_rank(factors.singular_values, K, T)
    projected = X @ factors.right_vectors[:, :r_hat]
    result = kmeans(projected, K, rng, sample_weight=sample_weight)

    logger.info(
        f"Spectral clustering: m={X.shape[0]}, K={K}, r_hat={r_hat}, "
        f"objective={result.objective:.4f}"
    )
    return ClusterAssignment(labels=result.labels, centers=result.centers, r_hat=r_hat)


def misclustering_rate(z: np.ndarray, z_star: np.ndarray, K: int) -> float:
    """
    Fraction of disagreements between two labelings after the best relabeling.

    The optimal bijection of labels is found with the Hungarian method on the
    K x K confusion matrix.

    Raises:
        ValueError: On length mismatch or labels outside [0, K)
    """
    z = np.asarray(z, dtype=int)
    z_star = np.asarray(z_star, dtype=int)
    if z.shape != z_star.shape:
        raise ValueError("label vectors must have equal length")
    if z.size == 0:
        return 0.0
    if min(z.min(), z_star.min()) < 0 or max(z.max(), z_star.max()) >= K:
        raise ValueError(f"labels must lie in [0, {K})")

    confusion = np.zeros((K, K), dtype=int)
    np.add.at(confusion, (z, z_star), 1)
    rows, cols = linear_sum_assignment(-confusion)
    agreements = confusion[rows, cols].sum()
    return float(1.0 - agreements / z.size)
