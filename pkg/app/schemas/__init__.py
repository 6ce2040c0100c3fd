"""Schemas package."""

from app.schemas.estimation import (
    ChoiceBreaking,
    ClusterAssignment,
    KMeansResult,
    PairwisePreferenceMatrix,
    PosteriorMatrix,
    SvdFactors,
    TransformedMatrix,
    WeightedMarkovChain,
)
from app.schemas.ranking import (
    MixtureParams,
    PLParams,
    Ranking,
    RankingDataset,
    RawRankingWithTies,
)
from app.schemas.report import EvalReport, ExperimentConfig, FitConfig, FitReport

__all__ = [
    "Ranking",
    "RankingDataset",
    "RawRankingWithTies",
    "PLParams",
    "MixtureParams",
    "ChoiceBreaking",
    "PairwisePreferenceMatrix",
    "TransformedMatrix",
    "WeightedMarkovChain",
    "SvdFactors",
    "KMeansResult",
    "ClusterAssignment",
    "PosteriorMatrix",
    "FitConfig",
    "FitReport",
    "ExperimentConfig",
    "EvalReport",
]
