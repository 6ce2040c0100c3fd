"""
Mixture-of-Plackett-Luce learning: spectral initialization followed by EM.

The E-step computes class posteriors in log space; the M-step solves one
weighted maximum-likelihood problem per component with weighted LSR, so the EM
iterations never decrease the marginal likelihood (up to solver tolerance).
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from app.config import get_settings
from app.exceptions import DisconnectedComparisonGraphError
from app.schemas.estimation import ClusterAssignment, PosteriorMatrix
from app.schemas.ranking import MixtureParams, RankingDataset
from app.schemas.report import FitConfig, FitReport, InitEstimator, LinkKind
from app.services.ls_estimator import fit_component
from app.services.pl_model import (
    component_log_likelihoods,
    mixture_log_likelihood,
    ranking_log_likelihoods,
)
from app.services.spectral_cluster import (
    default_threshold,
    embed_pairwise,
    row_weights,
    spectral_cluster,
)
from app.services.weighted_lsr import WeightedLSR
from app.utils.timing import Timer

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-6


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def cluster_rankings(
    dataset: RankingDataset,
    K: int,
    rng: np.random.Generator,
    threshold: Optional[float] = None,
) -> Tuple[ClusterAssignment, List[np.ndarray]]:
    """
    Spectral clustering of a dataset's rankings.

    Args:
        dataset: Full rankings
        K: Number of clusters
        rng: Random generator
        threshold: Singular-value gap threshold (default √n·√(m+n)·√(ln n))

    Returns:
        (assignment, members) where ``assignment.labels`` holds one label per
        ranking and ``members[k]`` the indices of the rankings with a row in
        cluster k (never empty)
    """
    X, sources = embed_pairwise(dataset, return_sources=True)
    T = default_threshold(dataset.n, dataset.m) if threshold is None else threshold
    rows = spectral_cluster(X, K, T, rng, sample_weight=row_weights(dataset, sources))

    _, first_row = np.unique(sources, return_index=True)
    labels = rows.labels[first_row]
    members = [np.unique(sources[rows.labels == k]) for k in range(K)]
    assignment = ClusterAssignment(labels=labels, centers=rows.centers, r_hat=rows.r_hat)
    return assignment, members


def init_from_clusters(
    dataset: RankingDataset,
    members: Sequence[np.ndarray],
    link: LinkKind = "logit",
    estimator: InitEstimator = "least_squares",
) -> MixtureParams:
    """
    Fit one component per cluster; β is the cluster weight proportions.

    ``estimator="lsr"`` fits each cluster with unit-weight LSR instead of the
    link-transformed least squares.
    """
    components = []
    sizes = []
    for k, member_indices in enumerate(members):
        if estimator == "least_squares":
            components.append(fit_component(dataset, member_indices, link=link))
        elif estimator == "lsr":
            indicator = np.zeros(dataset.num_rankings)
            indicator[member_indices] = 1.0
            try:
                components.append(WeightedLSR(dataset).fit(indicator))
            except DisconnectedComparisonGraphError as e:
                raise DisconnectedComparisonGraphError(f"{e} (cluster {k})") from e
        else:
            raise ValueError(f"Unsupported initial estimator: {estimator}")
        sizes.append(dataset.weights[member_indices].sum())

    sizes = np.asarray(sizes)
    return MixtureParams.from_components(components, sizes / sizes.sum())


def spectral_init(
    dataset: RankingDataset,
    K: int,
    link: LinkKind,
    rng: np.random.Generator,
    threshold: Optional[float] = None,
    estimator: InitEstimator = "least_squares",
) -> MixtureParams:
    """
    Spectral initialization: cluster the pairwise embedding, then fit each cluster.

    Raises:
        EmbeddingError: If the dataset has partial rankings
        ValueError: If there are fewer rankings than components
    """
    _, members = cluster_rankings(dataset, K, rng, threshold=threshold)
    mix = init_from_clusters(dataset, members, link=link, estimator=estimator)
    logger.info(f"Spectral initialization: K={K}, beta={np.round(mix.beta, 4).tolist()}")
    return mix


def random_init(n: int, K: int, rng: np.random.Generator) -> MixtureParams:
    """Baseline initializer: i.i.d. N(0, I_n) columns (centered) and uniform β."""
    return MixtureParams(thetas=rng.standard_normal((n, K)), beta=np.full(K, 1.0 / K))


# ---------------------------------------------------------------------------
# EM steps
# ---------------------------------------------------------------------------


def e_step(dataset: RankingDataset, mix: MixtureParams) -> PosteriorMatrix:
    """Class posteriors Q_lk ∝ β_k P(π_l | θ^k), normalized per row in log space."""
    with np.errstate(divide="ignore"):
        log_beta = np.log(mix.beta)
    joint = component_log_likelihoods(dataset, mix) + log_beta[None, :]
    Q = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
    return PosteriorMatrix(Q=Q)


def update_mixing(
    Q: PosteriorMatrix | np.ndarray, weights: Optional[np.ndarray] = None
) -> np.ndarray:
    """β_k = (multiplicity-weighted) column mean of the posteriors."""
    Q = Q.Q if isinstance(Q, PosteriorMatrix) else np.asarray(Q, dtype=float)
    weights = np.ones(Q.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    beta = weights @ Q / weights.sum()
    return beta / beta.sum()


def degenerate_components(Q: np.ndarray, weights: np.ndarray) -> List[int]:
    """Components whose posterior mass fell below DEGENERATE_MASS_RATIO · m."""
    mass = weights @ Q
    floor = get_settings().DEGENERATE_MASS_RATIO * weights.sum()
    return [int(k) for k in np.flatnonzero(mass < floor)]


def best_component(dataset: RankingDataset, thetas: np.ndarray, candidates: Sequence[int]) -> int:
    """
    Candidate under which the whole dataset is most likely.

    Scores Σ_l mult_l · log P(π_l | θ^k); ties go to the first candidate.
    """
    scores = [dataset.weights @ ranking_log_likelihoods(dataset, thetas[:, k]) for k in candidates]
    return int(candidates[int(np.argmax(scores))])


def m_step(
    dataset: RankingDataset,
    Q: PosteriorMatrix,
    mix_prev: MixtureParams,
    rng: Optional[np.random.Generator] = None,
    solver: Optional[WeightedLSR] = None,
) -> np.ndarray:
    """
    Weighted MLE of every component, warm-started at the previous estimate.

    Degenerate components are reseeded at a N(0, RESEED_SCALE²) perturbation of
    the donor, the solved component under which the whole dataset is most
    likely, instead of being solved.

    Returns:
        n x K matrix of mean-zero utilities

    Raises:
        DisconnectedComparisonGraphError: Naming the component whose weighted
            comparison graph is not strongly connected
    """
    settings = get_settings()
    solver = solver or WeightedLSR(dataset)
    rng = rng or np.random.default_rng(0)
    weights = dataset.weights
    degenerate = degenerate_components(Q.Q, weights)

    thetas = np.empty_like(mix_prev.thetas)
    for k in range(mix_prev.K):
        if k in degenerate:
            continue
        try:
            thetas[:, k] = solver.fit(Q.Q[:, k], mix_prev.component(k)).theta
        except DisconnectedComparisonGraphError as e:
            raise DisconnectedComparisonGraphError(f"{e} (component {k})") from e

    if degenerate:
        healthy = [k for k in range(mix_prev.K) if k not in degenerate]
        donor = best_component(dataset, thetas, healthy)
        for k in degenerate:
            logger.warning(
                f"Component {k} is degenerate (mass below "
                f"{settings.DEGENERATE_MASS_RATIO:g}·m); reseeding from component {donor}"
            )
            thetas[:, k] = thetas[:, donor] + rng.normal(0.0, settings.RESEED_SCALE, dataset.n)
    return thetas - thetas.mean(axis=0, keepdims=True)


def assign_labels(dataset: RankingDataset, mix: MixtureParams) -> np.ndarray:
    """MAP component of every ranking under a fitted mixture."""
    return np.argmax(e_step(dataset, mix).Q, axis=1)


# ---------------------------------------------------------------------------
# Full fit
# ---------------------------------------------------------------------------


def initialize(
    dataset: RankingDataset, K: int, config: FitConfig, rng: np.random.Generator
) -> MixtureParams:
    """Initial mixture for ``config.init`` ('spectral' or 'random')."""
    if config.init == "spectral":
        return spectral_init(
            dataset,
            K,
            config.link,
            rng,
            threshold=config.threshold,
            estimator=config.init_estimator,
        )
    if config.init == "random":
        return random_init(dataset.n, K, rng)
    raise ValueError("init='provided' requires an initial mixture")


def fit_em(
    dataset: RankingDataset,
    K: int,
    config: Optional[FitConfig] = None,
    init_mix: Optional[MixtureParams] = None,
) -> FitReport:
    """
    Fit a K-component mixture by EM with weighted-LSR M-steps.

    Args:
        dataset: Rankings (partial rankings require init 'random' or 'provided')
        K: Number of components
        config: Fit options (defaults from Settings)
        init_mix: Initial mixture; implies init kind 'provided'

    Returns:
        FitReport with the final mixture and the per-iteration log-likelihood trace

    Raises:
        ValueError: If there are fewer rankings than components
        DisconnectedComparisonGraphError: From the M-step, naming the component
        ConvergenceError: From the inner solvers
    """
    config = config or FitConfig()
    if dataset.num_rankings < K:
        raise ValueError(f"need at least K={K} rankings, got {dataset.num_rankings}")

    rng = np.random.default_rng(config.seed)
    init_kind = "provided" if init_mix is not None else config.init

    with Timer(f"EM fit (K={K}, n={dataset.n}, m={dataset.m:g})") as timer:
        mix = init_mix if init_mix is not None else initialize(dataset, K, config, rng)
        if mix.K != K or mix.n != dataset.n:
            raise ValueError("initial mixture does not match the dataset and K")
        start = mix

        solver = WeightedLSR(dataset, tol=config.lsr_tol, max_iter=config.lsr_max_iter)
        trace = [mixture_log_likelihood(dataset, mix)]
        converged = False

        for iteration in range(1, config.max_em_iter + 1):
            posterior = e_step(dataset, mix)
            thetas = m_step(dataset, posterior, mix, rng=rng, solver=solver)

            beta = mix.beta.copy() if config.fix_beta else update_mixing(posterior, dataset.weights)
            degenerate = degenerate_components(posterior.Q, dataset.weights)
            if degenerate and not config.fix_beta:
                healthy = [k for k in range(K) if k not in degenerate]
                donor = best_component(dataset, thetas, healthy)
                share = beta[donor] / (len(degenerate) + 1)
                beta[donor] = share
                beta[degenerate] = share
            mix = MixtureParams(thetas=thetas, beta=beta / beta.sum())

            loglik = mixture_log_likelihood(dataset, mix)
            previous = trace[-1]
            trace.append(loglik)
            if loglik < previous - MONOTONE_SLACK and not degenerate:
                logger.warning(
                    f"EM log-likelihood decreased at iteration {iteration}: "
                    f"{previous:.10f} -> {loglik:.10f}"
                )

            improvement = (loglik - previous) / max(abs(previous), np.finfo(float).tiny)
            logger.debug(f"EM iteration {iteration}: loglik={loglik:.8f}")
            if improvement < config.em_tol and not degenerate:
                converged = True
                break

    logger.info(
        f"EM finished after {len(trace) - 1} iterations "
        f"(converged={converged}, loglik={trace[-1]:.6f})"
    )
    return FitReport(
        mix=mix,
        loglik_trace=trace,
        n_iter=len(trace) - 1,
        converged=converged,
        init_kind=init_kind,
        seed=config.seed,
        wall_time=timer.elapsed,
        init_mix=start,
        config=config,
    )


# ---------------------------------------------------------------------------
# Model selection
# ---------------------------------------------------------------------------


def num_parameters(n: int, K: int) -> int:
    """Free parameters of a K-component mixture over n items: K(n-1) + (K-1)."""
    return K * (n - 1) + (K - 1)


def bic_score(loglik: float, n: int, K: int, m_val: float) -> float:
    """d·ln(m_val) - 2·loglik."""
    return num_parameters(n, K) * np.log(m_val) - 2.0 * loglik


def bic(fit: FitReport, validation: RankingDataset) -> float:
    """BIC of a fitted mixture on held-out rankings."""
    loglik = mixture_log_likelihood(validation, fit.mix)
    return float(bic_score(loglik, validation.n, fit.mix.K, validation.m))


def split_dataset(
    dataset: RankingDataset, val_fraction: float, seed: int
) -> Tuple[RankingDataset, RankingDataset]:
    """
    Deterministic train/validation split: shuffle by seed, hold out the last fraction.

    Raises:
        ValueError: If the fraction is outside (0, 1) or the dataset is too small
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must lie in (0, 1)")
    count = dataset.num_rankings
    if count < 2:
        raise ValueError("need at least two rankings to split")

    order = np.random.default_rng(seed).permutation(count)
    n_val = min(max(1, int(round(val_fraction * count))), count - 1)
    return dataset.subset(order[: count - n_val]), dataset.subset(order[count - n_val :])


def select_k(
    train: RankingDataset,
    validation: RankingDataset,
    k_candidates: Sequence[int],
    config: Optional[FitConfig] = None,
) -> Tuple[int, Dict[int, FitReport]]:
    """
    Pick K by BIC on the validation set.

    Every candidate is fitted on ``train`` with the same config; the smallest
    BIC wins and ties go to the smallest K.

    Returns:
        (best K, {K: FitReport})
    """
    if not k_candidates:
        raise ValueError("k_candidates must not be empty")
    config = config or FitConfig()

    reports: Dict[int, FitReport] = {}
    scores: Dict[int, float] = {}
    for K in sorted(set(int(k) for k in k_candidates)):
        reports[K] = fit_em(train, K, config)
        scores[K] = bic(reports[K], validation)
        logger.info(f"select_k: K={K}, BIC={scores[K]:.4f}")

    best = min(scores, key=lambda K: (scores[K], K))
    logger.info(f"select_k: chose K={best}")
    return best, reports
