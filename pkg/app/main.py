"""
Command-line entry point.

Subcommands: fit, sample, eval, select-k and synth-sweep. Logs go to standard
error; results go to JSON/CSV files (or standard output).
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from app.config import get_settings
from app.exceptions import PLMixError
from app.schemas.report import ExperimentConfig, FitConfig
from app.services.em_mixture import assign_labels, bic, fit_em, select_k, split_dataset
from app.services.evaluation import csv_columns, dist_metric, run_synthetic
from app.services.pl_model import mixture_log_likelihood
from app.services.spectral_cluster import default_threshold, misclustering_rate
from app.services.synthetic import generate_top_L, sample_mixture, truncate_rankings
from app.utils.preflib import read_soc, save_soc
from app.utils.serialization import (
    dumps,
    mixture_from_dict,
    mixture_to_dict,
    read_json,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)


def parse_threshold(value: str) -> Optional[float]:
    """'auto' or a positive real."""
    if value.lower() == "auto":
        return None
    try:
        threshold = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {value!r}")
    if threshold <= 0:
        raise argparse.ArgumentTypeError("threshold must be positive")
    return threshold


def parse_k_candidates(value: str) -> List[int]:
    """'2..10' (inclusive range) or a comma-separated list such as '1,2,4'."""
    try:
        if ".." in value:
            low, high = (int(part) for part in value.split("..", 1))
            candidates = list(range(low, high + 1))
        else:
            candidates = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid K candidates {value!r}")
    if not candidates or min(candidates) < 1:
        raise argparse.ArgumentTypeError("K candidates must be a nonempty set of positive integers")
    return candidates


def _emit(document: Dict[str, Any], output: Optional[str]) -> None:
    if output:
        write_json(document, output)
        logger.info(f"Wrote {output}")
    else:
        sys.stdout.write(dumps(document) + "\n")


def _fit_config(args: argparse.Namespace, threshold: Optional[float]) -> FitConfig:
    settings = get_settings()
    return FitConfig(
        init=args.init,
        link=args.link,
        init_estimator=getattr(args, "init_estimator", "least_squares"),
        em_tol=settings.EM_TOL if args.em_tol is None else args.em_tol,
        max_em_iter=settings.MAX_EM_ITER if args.max_em_iter is None else args.max_em_iter,
        lsr_tol=settings.LSR_TOL if args.lsr_tol is None else args.lsr_tol,
        threshold=threshold,
        fix_beta=getattr(args, "fix_beta", False),
        seed=args.seed,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit(args: argparse.Namespace) -> int:
    dataset = read_soc(args.input, rng=np.random.default_rng(args.seed))
    threshold = args.threshold
    if threshold is None:
        threshold = default_threshold(dataset.n, dataset.m)
    config = _fit_config(args, threshold)

    report = fit_em(dataset, args.k, config)
    document = {
        **mixture_to_dict(report.mix),
        "items": dataset.item_names,
        "loglik_trace": report.loglik_trace,
        "n_iter": report.n_iter,
        "converged": report.converged,
        "init_kind": report.init_kind,
        "seed": report.seed,
        "wall_time": report.wall_time,
        "config": config.model_dump(),
    }
    _emit(document, args.output)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    truth = generate_top_L(args.n, args.l if args.l is not None else args.n, args.k, rng)
    dataset, labels = sample_mixture(truth, args.m, rng, noise=args.noise)
    if args.top_s is not None:
        dataset = truncate_rankings(dataset, args.top_s)

    save_soc(dataset, args.output)
    logger.info(f"Wrote {dataset.num_rankings} rankings to {args.output}")
    if args.truth:
        write_json({**mixture_to_dict(truth), "labels": labels, "seed": args.seed}, args.truth)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    fitted = mixture_from_dict(read_json(args.fitted))
    truth_doc = read_json(args.truth)
    truth = mixture_from_dict(truth_doc)

    metrics: Dict[str, Any] = {"dist": dist_metric(fitted, truth)}
    if args.data:
        dataset = read_soc(args.data)
        metrics["loglik"] = mixture_log_likelihood(dataset, fitted)
        labels = truth_doc.get("labels")
        if labels is not None and len(labels) == dataset.num_rankings:
            predicted = assign_labels(dataset, fitted)
            metrics["misclustering"] = misclustering_rate(predicted, labels, fitted.K)
        else:
            logger.warning("Truth file has no labels matching the data; skipping misclustering")
    _emit(metrics, args.output)
    return 0


def cmd_select_k(args: argparse.Namespace) -> int:
    dataset = read_soc(args.input, rng=np.random.default_rng(args.seed))
    train, validation = split_dataset(dataset, args.val_split, args.seed)
    threshold = args.threshold
    if threshold is None:
        threshold = default_threshold(train.n, train.m)
    config = _fit_config(args, threshold)

    best, reports = select_k(train, validation, args.k_candidates, config)
    document = {
        "best_k": best,
        "candidates": [
            {
                "K": K,
                "bic": bic(report, validation),
                "loglik_train": report.final_loglik,
                "n_iter": report.n_iter,
                "converged": report.converged,
            }
            for K, report in reports.items()
        ],
        "model": mixture_to_dict(reports[best].mix),
        "items": dataset.item_names,
        "val_split": args.val_split,
        "config": config.model_dump(),
    }
    _emit(document, args.output)
    return 0


def cmd_synth_sweep(args: argparse.Namespace) -> int:
    config = ExperimentConfig.model_validate(read_json(args.config))
    report = run_synthetic(config)
    write_csv(report.rows, csv_columns(config), args.output)
    logger.info(
        f"Sweep done: median dist={report.dist:.6f}, "
        f"misclustering={report.misclustering:.4f}, failures={report.failures}"
    )
    if args.summary:
        write_json(report.model_dump(exclude={"rows"}), args.summary)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_fit_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--init", choices=["spectral", "random"], default="spectral")
    parser.add_argument("--link", choices=["logit", "probit"], default="logit")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-em-iter", type=int, default=None)
    parser.add_argument("--em-tol", type=float, default=None)
    parser.add_argument("--lsr-tol", type=float, default=None)
    parser.add_argument(
        "--threshold",
        type=parse_threshold,
        default=None,
        help="Spectral-gap threshold T, or 'auto' (default)",
    )
    parser.add_argument("--output", "-o", default=None, help="Output JSON (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plmix",
        description="Mixtures of Plackett-Luce models: spectral initialization + EM.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser("fit", help="Fit a K-component mixture to a PrefLib file")
    fit.add_argument("input", help="PrefLib soc/soi file")
    fit.add_argument("--k", type=int, required=True, help="Number of components")
    fit.add_argument(
        "--init-estimator",
        choices=["least_squares", "lsr"],
        default="least_squares",
        help="Per-cluster estimator of the spectral initializer",
    )
    fit.add_argument("--fix-beta", action="store_true", help="Keep initial mixing weights")
    _add_fit_options(fit)
    fit.set_defaults(handler=cmd_fit)

    sample = subparsers.add_parser("sample", help="Sample rankings from a top-L mixture")
    sample.add_argument("--n", type=int, required=True)
    sample.add_argument("--k", type=int, required=True)
    sample.add_argument("--l", type=int, default=None, help="Informative items (default n)")
    sample.add_argument("--m", type=int, required=True)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--noise", choices=["gumbel", "normal_halfvar"], default="gumbel")
    sample.add_argument("--top-s", type=int, default=None, help="Keep only the top-s prefix")
    sample.add_argument("--output", "-o", required=True, help="Output PrefLib file")
    sample.add_argument("--truth", default=None, help="Write the true mixture and labels (JSON)")
    sample.set_defaults(handler=cmd_sample)

    evaluate = subparsers.add_parser("eval", help="Compare a fitted mixture to the truth")
    evaluate.add_argument("fitted", help="Fitted mixture JSON (output of fit)")
    evaluate.add_argument("truth", help="True mixture JSON (output of sample --truth)")
    evaluate.add_argument("--data", default=None, help="Rankings for loglik/misclustering")
    evaluate.add_argument("--output", "-o", default=None)
    evaluate.set_defaults(handler=cmd_eval)

    select = subparsers.add_parser("select-k", help="Choose K by validation BIC")
    select.add_argument("input", help="PrefLib soc file")
    select.add_argument("--k-candidates", type=parse_k_candidates, default=list(range(2, 11)))
    select.add_argument("--val-split", type=float, default=0.2)
    _add_fit_options(select)
    select.set_defaults(handler=cmd_select_k)

    sweep = subparsers.add_parser("synth-sweep", help="Run a synthetic experiment sweep")
    sweep.add_argument("config", help="ExperimentConfig JSON")
    sweep.add_argument("--output", "-o", required=True, help="Output CSV")
    sweep.add_argument("--summary", default=None, help="Optional aggregate JSON")
    sweep.set_defaults(handler=cmd_synth_sweep)

    return parser


def configure_logging() -> None:
    logging.basicConfig(
        level=get_settings().LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI.

    Returns:
        0 on success, 2 on usage errors, 1 on runtime errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    configure_logging()
    try:
        return args.handler(args)
    except (PLMixError, ValueError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        sys.stderr.write(f"error: {e}\n")
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
