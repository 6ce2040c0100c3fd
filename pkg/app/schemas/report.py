"""
Pydantic schemas for fit/experiment configuration and their reports.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import get_settings
from app.schemas.ranking import MixtureParams

InitKind = Literal["spectral", "random", "provided"]
LinkKind = Literal["logit", "probit"]
InitEstimator = Literal["least_squares", "lsr"]


class FitConfig(BaseModel):
    """
    Options of a single EM fit.

    Defaults come from ``Settings`` so they can be tuned through the environment.

    Example:
        {
            "init": "spectral",
            "link": "logit",
            "em_tol": 1e-8,
            "max_em_iter": 200,
            "seed": 7
        }
    """

    init: InitKind = Field("spectral", description="Initializer (spectral, random, provided)")
    link: LinkKind = Field("logit", description="Pairwise link of the least-squares step")
    init_estimator: InitEstimator = Field(
        "least_squares", description="Per-cluster estimator of the spectral initializer"
    )
    em_tol: float = Field(default_factory=lambda: get_settings().EM_TOL, gt=0)
    max_em_iter: int = Field(default_factory=lambda: get_settings().MAX_EM_ITER, ge=0)
    lsr_tol: float = Field(default_factory=lambda: get_settings().LSR_TOL, gt=0)
    lsr_max_iter: int = Field(default_factory=lambda: get_settings().LSR_MAX_ITER, ge=1)
    threshold: Optional[float] = Field(
        None, gt=0, description="Spectral-gap threshold T (None = automatic)"
    )
    fix_beta: bool = Field(False, description="Keep the initial mixing weights fixed")
    seed: int = Field(0, ge=0, description="64-bit seed of the run")


class FitReport(BaseModel):
    """Result of ``fit_em``: final mixture, likelihood trace and bookkeeping."""

    mix: MixtureParams
    loglik_trace: List[float] = Field(..., min_length=1)
    n_iter: int = Field(..., ge=0)
    converged: bool
    init_kind: InitKind
    seed: int
    wall_time: float = Field(..., ge=0)
    init_mix: Optional[MixtureParams] = None
    config: Optional[FitConfig] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_trace(self) -> "FitReport":
        if self.n_iter != len(self.loglik_trace) - 1:
            raise ValueError("n_iter must equal the number of EM iterations in the trace")
        return self

    @property
    def final_loglik(self) -> float:
        return self.loglik_trace[-1]


class ExperimentConfig(BaseModel):
    """
    Synthetic top-L experiment knobs (the generative model of the scaling checks).

    Example:
        {"n": 15, "K": 2, "L": 15, "m": 2000, "seed": 0, "repetitions": 10}
    """

    n: int = Field(..., ge=2)
    K: int = Field(..., ge=1)
    L: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    seed: int = Field(0, ge=0)
    repetitions: int = Field(1, ge=1)
    init: Literal["spectral", "random"] = "spectral"
    link: LinkKind = "logit"
    run_em: bool = Field(True, description="Refine the initializer with EM")
    val_fraction: float = Field(0.2, gt=0, lt=1, description="Validation sample size / m")
    em_tol: float = Field(default_factory=lambda: get_settings().EM_TOL, gt=0)
    max_em_iter: int = Field(default_factory=lambda: get_settings().MAX_EM_ITER, ge=0)
    lsr_tol: float = Field(default_factory=lambda: get_settings().LSR_TOL, gt=0)
    k_candidates: List[int] = Field(default_factory=list)
    record_runtime: bool = Field(True, description="Write wall time (disable for bitwise CSVs)")

    @model_validator(mode="after")
    def check_counts(self) -> "ExperimentConfig":
        if self.L > self.n:
            raise ValueError("L must not exceed n")
        if any(k < 1 for k in self.k_candidates):
            raise ValueError("k_candidates must be positive")
        return self

    def fit_config(self, seed: int) -> FitConfig:
        return FitConfig(
            init=self.init,
            link=self.link,
            em_tol=self.em_tol,
            max_em_iter=self.max_em_iter,
            lsr_tol=self.lsr_tol,
            seed=seed,
        )


class EvalReport(BaseModel):
    """Aggregated metrics of a synthetic sweep plus one row per repetition."""

    dist: float = Field(..., description="Median final dist over successful seeds")
    misclustering: float = Field(..., description="Mean misclustering rate")
    loglik_train: float
    loglik_val: float
    runtime_s: float = Field(..., ge=0)
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    failures: int = Field(0, ge=0)
