"""
Weighted Luce Spectral Ranking.

Finds the maximizer of the weighted Plackett-Luce log-likelihood as the fixed
point of a Markov chain construction: given the current utilities, every choice
enumeration sends probability mass from each loser in its choice set to the
winner; the stationary distribution of that chain gives the next utilities.
"""

import logging
import warnings
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, solve_triangular
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import softmax

from app.config import get_settings
from app.exceptions import ConvergenceError, DisconnectedComparisonGraphError
from app.schemas.estimation import ChoiceBreaking, WeightedMarkovChain
from app.schemas.ranking import PLParams, RankingDataset
from app.services.choice_breaking import choice_breaking, expand_weights
from app.services.pl_model import ranking_log_likelihoods

logger = logging.getLogger(__name__)

NORMALIZER_SLACK = 1e-12
STAGNATION_RTOL = 1e-3


def transition_masses(
    breaking: ChoiceBreaking, w: np.ndarray, theta: np.ndarray, n: int
) -> np.ndarray:
    """
    Unnormalized off-diagonal masses of the weighted LSR chain.

    ``mass[i, j]`` sums w_e / Σ_{k∈A_e} exp(θ_k) over enumerations e won by j
    whose choice set A_e contains i.
    """
    w = np.asarray(w, dtype=float)
    if w.size != len(breaking):
        raise ValueError(f"expected {len(breaking)} enumeration weights, got {w.size}")

    # A common shift of theta scales every denominator equally; M is unchanged.
    strengths = np.exp(theta - theta.max())
    denominators = np.bincount(
        breaking.member_enum, weights=strengths[breaking.member_items], minlength=len(breaking)
    )
    rates = w / denominators

    losers = breaking.loser_mask
    enum_ids = breaking.member_enum[losers]
    mass = coo_matrix(
        (rates[enum_ids], (breaking.member_items[losers], breaking.winners[enum_ids])),
        shape=(n, n),
    ).toarray()
    np.fill_diagonal(mass, 0.0)
    return mass


def build_chain(
    breaking: ChoiceBreaking, w: np.ndarray, theta: PLParams | np.ndarray, n: int
) -> WeightedMarkovChain:
    """
    Row-stochastic weighted LSR chain M(θ).

    Off-diagonal entries are the transition masses divided by d, the largest
    off-diagonal row sum (times 1 + 1e-12); the diagonal takes the remainder so
    every row sums to one with non-negative entries.

    Example:
        Rankings {[0,1],[1,0]} with unit weights and θ = 0 give M = [[0,1],[1,0]].
    """
    theta = theta.theta if isinstance(theta, PLParams) else np.asarray(theta, dtype=float)
    mass = transition_masses(breaking, w, theta, n)
    row_sums = mass.sum(axis=1)
    d = float(row_sums.max()) * (1.0 + NORMALIZER_SLACK)
    if d <= 0:
        return WeightedMarkovChain(M=np.eye(n), d=1.0)

    M = mass / d
    M[np.diag_indices(n)] = 1.0 - row_sums / d
    return WeightedMarkovChain(M=M, d=d)


def check_strongly_connected(adjacency: np.ndarray) -> None:
    """Raise if the directed graph with edges where adjacency > 0 is not strongly connected."""
    n_components, _ = connected_components(
        coo_matrix(adjacency > 0), directed=True, connection="strong"
    )
    if n_components > 1:
        raise DisconnectedComparisonGraphError()


def _solve_stationary(M: np.ndarray) -> Optional[np.ndarray]:
    """
    Direct solve of pᵀ(M - I) = 0 through an LU factorization of the generator.

    The generator has rank n - 1 on a strongly connected chain, so the last
    pivot is (numerically) zero; fixing p_{n-1} = 1 and back-substituting the
    leading triangle gives the unnormalized solution. Returns None when the
    factorization yields no usable probability vector.
    """
    n = M.shape[0]
    with warnings.catch_warnings():
        # The generator is singular by construction.
        warnings.simplefilter("ignore")
        lu, _ = lu_factor((M - np.eye(n)).T, check_finite=False)
        try:
            head = solve_triangular(lu[:-1, :-1], -lu[:-1, -1], check_finite=False)
        except LinAlgError:
            return None
    p = np.append(head, 1.0)
    if not np.all(np.isfinite(p)) or p.sum() <= 0:
        return None
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _power_iteration(M: np.ndarray, p: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Power iteration from p; averages two consecutive iterates when the residual stalls."""
    residual = np.inf
    for _ in range(max_iter):
        nxt = p @ M
        nxt /= nxt.sum()
        previous, residual = residual, float(np.max(np.abs(nxt - p)))
        if residual <= tol:
            return nxt
        if abs(previous - residual) <= STAGNATION_RTOL * residual:
            averaged = 0.5 * (p + nxt)
            if np.max(np.abs(averaged @ M - averaged)) <= tol:
                return averaged / averaged.sum()
        p = nxt

    raise ConvergenceError(
        "stationary distribution did not converge", residual=residual, iterations=max_iter
    )


def stationary_distribution(
    chain: WeightedMarkovChain,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    p0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Stationary distribution of a row-stochastic chain.

    Solves the stationary equations directly with an LU factorization of the
    generator M - I. Power iteration only polishes a direct solution whose
    residual is above tol, or takes over from ``p0`` (uniform by default) when
    the factorization is unusable. A chain with no off-diagonal mass leaves
    every distribution invariant and returns the start vector.

    Args:
        chain: Row-stochastic chain
        tol: Residual tolerance on ‖pᵀM - pᵀ‖∞ (default STATIONARY_TOL)
        max_iter: Power-iteration budget (default max(100·n, STATIONARY_MIN_ITER))
        p0: Optional start distribution for the fallback

    Returns:
        Probability vector p with p >= 0 and Σp = 1

    Raises:
        DisconnectedComparisonGraphError: If the transition graph is not strongly connected
        ConvergenceError: If the residual is still above tol after max_iter steps
    """
    settings = get_settings()
    n = chain.n
    tol = settings.STATIONARY_TOL if tol is None else tol
    if max_iter is None:
        max_iter = max(settings.STATIONARY_MAX_ITER_PER_ITEM * n, settings.STATIONARY_MIN_ITER)

    M = chain.M
    p = np.full(n, 1.0 / n) if p0 is None else np.asarray(p0, dtype=float) / np.sum(p0)

    off_diagonal = M - np.diag(np.diag(M))
    if not np.any(off_diagonal > 0):
        return p
    check_strongly_connected(off_diagonal)

    direct = _solve_stationary(M)
    if direct is None:
        logger.debug("Direct stationary solve unusable; falling back to power iteration")
        return _power_iteration(M, p, tol, max_iter)
    if np.max(np.abs(direct @ M - direct)) <= tol:
        return direct
    return _power_iteration(M, direct, tol, max_iter)


def weighted_log_likelihood(dataset: RankingDataset, q: Sequence[float], theta) -> float:
    """Σ_l q_l · mult_l · log P(π_l | θ)."""
    theta = theta.theta if isinstance(theta, PLParams) else np.asarray(theta, dtype=float)
    q = np.asarray(q, dtype=float)
    if q.size != dataset.num_rankings:
        raise ValueError("weight vector must have one entry per ranking")
    return float((q * dataset.weights) @ ranking_log_likelihoods(dataset, theta))


def fixed_point_residual(
    breaking: ChoiceBreaking, w: np.ndarray, theta: PLParams | np.ndarray, n: int
) -> float:
    """‖p̂ᵀM(p̂) - p̂ᵀ‖∞ with p̂ = softmax(θ); zero exactly at the weighted MLE."""
    theta = theta.theta if isinstance(theta, PLParams) else np.asarray(theta, dtype=float)
    p = softmax(theta)
    M = build_chain(breaking, w, theta, n).M
    return float(np.max(np.abs(p @ M - p)))


class WeightedLSR:
    """
    Weighted LSR solver bound to one dataset.

    The choice breaking is computed once and shared by every solve, so the K
    M-step problems of an EM iteration reuse it.
    """

    def __init__(
        self,
        dataset: RankingDataset,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
    ):
        settings = get_settings()
        self.dataset = dataset
        self.tol = settings.LSR_TOL if tol is None else tol
        self.max_iter = settings.LSR_MAX_ITER if max_iter is None else max_iter
        self.breaking = choice_breaking(dataset)

    def enumeration_weights(self, q: Sequence[float]) -> np.ndarray:
        """Per-enumeration weights q_l · mult_l repeated s_l - 1 times."""
        q = np.asarray(q, dtype=float)
        if np.any(q < 0) or not np.any(q > 0):
            raise ValueError("weights must be non-negative with a positive sum")
        return expand_weights(q * self.dataset.weights, self.dataset.lengths)

    def check_connectivity(self, w: np.ndarray) -> None:
        """Strong connectivity of the comparison graph restricted to non-negligible weights."""
        floor = get_settings().WEIGHT_FLOOR_RATIO * float(w.max())
        significant = np.where(w > floor, w, 0.0)
        n = self.dataset.n
        mass = transition_masses(self.breaking, significant, np.zeros(n), n)
        check_strongly_connected(mass)

    def fit(self, q: Sequence[float], theta0: Optional[PLParams] = None) -> PLParams:
        """
        Weighted maximum-likelihood utilities.

        Args:
            q: Per-ranking weights (multiplied by the dataset multiplicities)
            theta0: Warm start (default θ = 0)

        Returns:
            Mean-zero PLParams at the fixed point

        Raises:
            DisconnectedComparisonGraphError: Comparison graph not strongly connected
            ConvergenceError: Fixed-point iteration did not settle within max_iter
        """
        n = self.dataset.n
        w = self.enumeration_weights(q)
        self.check_connectivity(w)

        theta = np.zeros(n) if theta0 is None else theta0.theta - theta0.theta.mean()
        delta = np.inf
        for iteration in range(1, self.max_iter + 1):
            chain = build_chain(self.breaking, w, theta, n)
            p = stationary_distribution(chain, p0=softmax(theta))
            log_p = np.log(np.maximum(p, np.finfo(float).tiny))
            updated = log_p - log_p.mean()
            delta = float(np.max(np.abs(updated - theta)))
            theta = updated
            if delta <= self.tol:
                residual = fixed_point_residual(self.breaking, w, theta, n)
                logger.debug(
                    f"Weighted LSR converged in {iteration} iterations "
                    f"(fixed-point residual {residual:.3e})"
                )
                return PLParams(theta=theta)

        raise ConvergenceError(
            "weighted LSR did not converge", residual=delta, iterations=self.max_iter
        )


def weighted_lsr(
    dataset: RankingDataset,
    q: Sequence[float],
    theta0: Optional[PLParams] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> PLParams:
    """Functional wrapper around ``WeightedLSR(dataset).fit(q, theta0)``."""
    return WeightedLSR(dataset, tol=tol, max_iter=max_iter).fit(q, theta0)
