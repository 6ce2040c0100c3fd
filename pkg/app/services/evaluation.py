"""
Evaluation metrics and the synthetic top-L experiment runner.
"""

import concurrent.futures
import logging
import math
from typing import Any, Dict, List

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.config import get_settings
from app.schemas.ranking import MixtureParams
from app.schemas.report import EvalReport, ExperimentConfig
from app.services.em_mixture import assign_labels, fit_em, select_k
from app.services.pl_model import mixture_log_likelihood
from app.services.spectral_cluster import misclustering_rate
from app.services.synthetic import generate_top_L, sample_mixture
from app.utils.timing import Timer

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "seed",
    "n",
    "K",
    "L",
    "m",
    "init",
    "dist_init",
    "dist_final",
    "miscluster",
    "loglik_val",
    "runtime_s",
]
METRIC_COLUMNS = ["dist_init", "dist_final", "miscluster", "loglik_val", "loglik_train"]


def _as_matrix(value: MixtureParams | np.ndarray) -> np.ndarray:
    if isinstance(value, MixtureParams):
        return value.thetas
    arr = np.asarray(value, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def dist_metric(
    theta_hat: MixtureParams | np.ndarray, theta_star: MixtureParams | np.ndarray
) -> float:
    """
    Relabeling-minimal Frobenius distance between two utility matrices.

    Columns are mean-centered first; the best component relabeling is the
    optimal assignment on the K x K matrix of squared column distances.

    Raises:
        ValueError: If the shapes differ
    """
    A = _as_matrix(theta_hat)
    B = _as_matrix(theta_star)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")

    A = A - A.mean(axis=0, keepdims=True)
    B = B - B.mean(axis=0, keepdims=True)
    cost = ((A[:, :, None] - B[:, None, :]) ** 2).sum(axis=0)
    rows, cols = linear_sum_assignment(cost)
    return float(math.sqrt(max(cost[rows, cols].sum(), 0.0)))


def csv_columns(config: ExperimentConfig) -> List[str]:
    """Sweep CSV header; ``k_selected`` is appended when model selection runs."""
    return CSV_COLUMNS + (["k_selected"] if config.k_candidates else [])


def _failed_row(config: ExperimentConfig, seed: int) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "seed": seed,
        "n": config.n,
        "K": config.K,
        "L": config.L,
        "m": config.m,
        "init": config.init,
        "runtime_s": 0.0,
    }
    row.update({column: float("nan") for column in METRIC_COLUMNS})
    if config.k_candidates:
        row["k_selected"] = -1
    return row


def run_repetition(config: ExperimentConfig, seed: int) -> Dict[str, Any]:
    """
    One synthetic repetition: draw a top-L mixture, sample, fit and score.

    Validation rankings (``val_fraction · m`` of them) are drawn from the same
    mixture on top of the m training rankings. ``loglik_val`` and
    ``loglik_train`` are mean log-likelihoods per ranking.
    """
    rng = np.random.default_rng(seed)
    row = _failed_row(config, seed)

    with Timer(f"synthetic repetition seed={seed}") as timer:
        truth = generate_top_L(config.n, config.L, config.K, rng)
        train, labels = sample_mixture(truth, config.m, rng)
        validation, _ = sample_mixture(truth, max(1, round(config.val_fraction * config.m)), rng)

        fit_config = config.fit_config(seed)
        if not config.run_em:
            fit_config = fit_config.model_copy(update={"max_em_iter": 0})
        report = fit_em(train, config.K, fit_config)

        row["dist_init"] = dist_metric(report.init_mix, truth)
        row["dist_final"] = dist_metric(report.mix, truth)
        row["miscluster"] = misclustering_rate(assign_labels(train, report.mix), labels, config.K)
        row["loglik_train"] = report.final_loglik / train.m
        row["loglik_val"] = mixture_log_likelihood(validation, report.mix) / validation.m

        if config.k_candidates:
            row["k_selected"], _ = select_k(train, validation, config.k_candidates, fit_config)

    row["runtime_s"] = timer.elapsed if config.record_runtime else 0.0
    return row


def _safe_repetition(config: ExperimentConfig, seed: int) -> Dict[str, Any]:
    try:
        return run_repetition(config, seed)
    except Exception as e:
        logger.error(f"Synthetic repetition seed={seed} failed: {e}")
        return _failed_row(config, seed)


def run_synthetic(config: ExperimentConfig) -> EvalReport:
    """
    Run ``config.repetitions`` synthetic repetitions with seeds seed, seed+1, ...

    Repetitions run concurrently; each has its own rng stream and rows come
    back in seed order. A failing repetition yields a row of NaN metrics and
    the sweep continues.

    Returns:
        EvalReport with the median final dist, mean misclustering and mean
        log-likelihoods over the successful repetitions
    """
    seeds = [config.seed + r for r in range(config.repetitions)]
    workers = max(1, min(get_settings().SWEEP_MAX_WORKERS, len(seeds)))

    with Timer(f"synthetic sweep ({len(seeds)} repetitions)") as timer:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(lambda seed: _safe_repetition(config, seed), seeds))

    ok = [row for row in rows if not math.isnan(row["dist_final"])]
    failures = len(rows) - len(ok)
    if failures:
        logger.warning(f"{failures} of {len(rows)} repetitions failed")

    def aggregate(column: str, reducer) -> float:
        values = [row[column] for row in ok]
        return float(reducer(values)) if values else float("nan")

    return EvalReport(
        dist=aggregate("dist_final", np.median),
        misclustering=aggregate("miscluster", np.mean),
        loglik_train=aggregate("loglik_train", np.mean),
        loglik_val=aggregate("loglik_val", np.mean),
        runtime_s=timer.elapsed if config.record_runtime else 0.0,
        rows=rows,
        failures=failures,
    )
