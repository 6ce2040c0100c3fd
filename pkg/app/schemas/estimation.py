"""
Pydantic schemas for intermediate estimation objects: choice breakings,
pairwise preference matrices, Markov chains, clusterings and posteriors.
"""

from typing import FrozenSet, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

ROW_SUM_TOL = 1e-12


class ChoiceBreaking(BaseModel):
    """
    Choice enumerations ``(winner, choice_set, source)`` of a dataset, stored flat.

    Enumeration ``e`` picks ``winners[e]`` out of the choice set
    ``{member_items[p] : member_enum[p] == e}``; ``sources[e]`` is the index of the
    ranking it came from. Enumerations are in ranking order, and within a ranking
    in position order.
    """

    winners: np.ndarray = Field(..., description="Winner item per enumeration")
    sources: np.ndarray = Field(..., description="Source ranking index per enumeration")
    member_enum: np.ndarray = Field(..., description="Enumeration index per choice-set slot")
    member_items: np.ndarray = Field(..., description="Item id per choice-set slot")
    n: int = Field(..., ge=2)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def __len__(self) -> int:
        return int(self.winners.size)

    @property
    def enumerations(self) -> List[Tuple[int, FrozenSet[int], int]]:
        """Materialize the enumerations as ``(winner, choice_set, source)`` tuples."""
        order = np.argsort(self.member_enum, kind="stable")
        splits = np.cumsum(np.bincount(self.member_enum, minlength=len(self)))[:-1]
        sets = np.split(self.member_items[order], splits)
        return [
            (int(w), frozenset(int(i) for i in s), int(src))
            for w, s, src in zip(self.winners, sets, self.sources)
        ]

    @property
    def loser_mask(self) -> np.ndarray:
        """Slots whose item is in the choice set but is not the winner."""
        return self.member_items != self.winners[self.member_enum]


class PairwisePreferenceMatrix(BaseModel):
    """Empirical probabilities ``probs[i, j]`` that item i is ranked above item j."""

    probs: np.ndarray = Field(..., description="n x n win probabilities")
    count: float = Field(..., gt=0, description="Total weight of the rankings used")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_complementary(self) -> "PairwisePreferenceMatrix":
        p = self.probs
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("probs must be a square matrix")
        off = ~np.eye(p.shape[0], dtype=bool)
        if np.any(np.abs((p + p.T)[off] - 1.0) > 1e-12):
            raise ValueError("probs must satisfy P_ij + P_ji = 1")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("probs must lie in [0, 1]")
        return self

    @property
    def n(self) -> int:
        return int(self.probs.shape[0])


class TransformedMatrix(BaseModel):
    """Link-transformed preferences; skew-symmetric off the diagonal."""

    phi: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_skew(self) -> "TransformedMatrix":
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("phi must be finite")
        if np.any(np.abs(self.phi + self.phi.T) > 1e-10):
            raise ValueError("phi must be skew-symmetric")
        return self


class WeightedMarkovChain(BaseModel):
    """Row-stochastic transition matrix ``M`` and the normalizer ``d`` used to build it."""

    M: np.ndarray
    d: float = Field(..., gt=0)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_stochastic(self) -> "WeightedMarkovChain":
        if np.any(self.M < 0):
            raise ValueError("transition matrix has negative entries")
        if np.any(np.abs(self.M.sum(axis=1) - 1.0) > ROW_SUM_TOL * self.M.shape[0]):
            raise ValueError("transition matrix rows must sum to 1")
        return self

    @property
    def n(self) -> int:
        return int(self.M.shape[0])


class SvdFactors(BaseModel):
    """Leading singular values and right singular vectors of an embedding matrix."""

    singular_values: np.ndarray
    right_vectors: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class KMeansResult(BaseModel):
    """Best k-means run: labels, centers, objective and its per-iteration history."""

    labels: np.ndarray
    centers: np.ndarray
    objective: float
    history: List[float] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class ClusterAssignment(BaseModel):
    """Cluster labels in ``[0, K)``, cluster centers and the selected projection rank."""

    labels: np.ndarray
    centers: np.ndarray
    r_hat: int = Field(..., ge=1)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_labels(self) -> "ClusterAssignment":
        K = self.centers.shape[0]
        if self.r_hat > K:
            raise ValueError("r_hat cannot exceed the number of clusters")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= K):
            raise ValueError("labels must lie in [0, K)")
        return self

    @property
    def K(self) -> int:
        return int(self.centers.shape[0])


class PosteriorMatrix(BaseModel):
    """Class posteriors ``Q[l, k] = p(z_l = k | ranking l)``."""

    Q: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_rows(self) -> "PosteriorMatrix":
        if np.any(self.Q < 0):
            raise ValueError("posteriors must be non-negative")
        if np.any(np.abs(self.Q.sum(axis=1) - 1.0) > ROW_SUM_TOL * max(1, self.Q.shape[1])):
            raise ValueError("posterior rows must sum to 1")
        return self
