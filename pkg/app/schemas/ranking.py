"""
Pydantic schemas for rankings, ranking datasets and Plackett-Luce parameters.
"""

from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SIMPLEX_TOL = 1e-9


class Ranking(BaseModel):
    """
    An ordered sequence of distinct item ids, most preferred first.

    A ranking of ``s < n`` items is a partial (top-s) ranking: the unlisted
    items are unranked, not tied last.
    """

    items: Tuple[int, ...] = Field(..., min_length=2, description="Item ids, best first")

    model_config = ConfigDict(frozen=True)

    @field_validator("items")
    @classmethod
    def check_items(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        """Item ids must be distinct non-negative integers."""
        if min(v) < 0:
            raise ValueError("item ids must be non-negative")
        if len(set(v)) != len(v):
            raise ValueError("ranking contains a duplicate item")
        return v

    @property
    def size(self) -> int:
        return len(self.items)


class RawRankingWithTies(BaseModel):
    """A ranking whose positions are groups of tied items."""

    groups: Tuple[FrozenSet[int], ...] = Field(..., min_length=1)

    model_config = ConfigDict(frozen=True)

    @field_validator("groups")
    @classmethod
    def check_groups(cls, v: Tuple[FrozenSet[int], ...]) -> Tuple[FrozenSet[int], ...]:
        """Groups must be nonempty and pairwise disjoint."""
        seen: set = set()
        for group in v:
            if not group:
                raise ValueError("tie groups must be nonempty")
            if seen & group:
                raise ValueError("tie groups must be disjoint")
            seen |= group
        return v

    @property
    def has_ties(self) -> bool:
        return any(len(group) > 1 for group in self.groups)


class RankingDataset(BaseModel):
    """
    A collection of rankings over the item universe ``{0, ..., n-1}``.

    Multiplicities are positive real weights (default 1 per ranking). They
    stay real-valued so that fractional tie-expansion weights compose with
    repeated orders.
    """

    n: int = Field(..., ge=2, description="Item-universe size")
    rankings: List[Ranking] = Field(..., min_length=1)
    multiplicities: Optional[List[float]] = Field(
        None, description="Per-ranking positive weights (default 1)"
    )
    item_names: Optional[List[str]] = Field(None, description="Optional display name per item")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_consistency(self) -> "RankingDataset":
        """Every ranking must be valid against n; multiplicities must align."""
        for index, ranking in enumerate(self.rankings):
            if max(ranking.items) >= self.n:
                raise ValueError(f"ranking {index} has an item id >= n={self.n}")
        if self.multiplicities is not None:
            if len(self.multiplicities) != len(self.rankings):
                raise ValueError("multiplicities must have one entry per ranking")
            if any(not np.isfinite(w) or w <= 0 for w in self.multiplicities):
                raise ValueError("multiplicities must be positive and finite")
        if self.item_names is not None and len(self.item_names) != self.n:
            raise ValueError("item_names must have exactly n entries")
        return self

    @classmethod
    def from_lists(
        cls,
        n: int,
        rankings: Sequence[Sequence[int]],
        multiplicities: Optional[Sequence[float]] = None,
        item_names: Optional[Sequence[str]] = None,
    ) -> "RankingDataset":
        """Build a dataset from plain integer sequences."""
        return cls(
            n=n,
            rankings=[Ranking(items=tuple(int(i) for i in r)) for r in rankings],
            multiplicities=None if multiplicities is None else [float(w) for w in multiplicities],
            item_names=None if item_names is None else list(item_names),
        )

    @property
    def num_rankings(self) -> int:
        """Number of distinct ranking entries (rows of the dataset)."""
        return len(self.rankings)

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of every ranking as a float vector."""
        if self.multiplicities is None:
            return np.ones(len(self.rankings))
        return np.asarray(self.multiplicities, dtype=float)

    @property
    def m(self) -> float:
        """Total number of observations, Σ multiplicities."""
        return float(self.weights.sum())

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([r.size for r in self.rankings], dtype=int)

    @property
    def is_full(self) -> bool:
        """True when every ranking orders the whole universe."""
        return bool(np.all(self.lengths == self.n))

    @cached_property
    def length_groups(self) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
        """
        Rankings grouped by length for vectorized kernels.

        Returns:
            Mapping ``s -> (indices, items)`` where ``items`` is an
            ``len(indices) x s`` integer matrix of the rankings of length s.
        """
        groups: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        for s in np.unique(self.lengths):
            indices = np.flatnonzero(self.lengths == s)
            items = np.array([self.rankings[i].items for i in indices], dtype=int)
            groups[int(s)] = (indices, items)
        return groups

    def subset(self, indices: Sequence[int]) -> "RankingDataset":
        """Return the dataset restricted to the given ranking indices (order kept)."""
        indices = [int(i) for i in indices]
        if not indices:
            raise ValueError("cannot take an empty subset of a dataset")
        multiplicities = None
        if self.multiplicities is not None:
            multiplicities = [self.multiplicities[i] for i in indices]
        return RankingDataset(
            n=self.n,
            rankings=[self.rankings[i] for i in indices],
            multiplicities=multiplicities,
            item_names=self.item_names,
        )


class PLParams(BaseModel):
    """Utilities of a single Plackett-Luce model (natural-log scale)."""

    theta: np.ndarray = Field(..., description="Length-n utility vector")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("theta", mode="before")
    @classmethod
    def coerce_theta(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("theta must be a vector with at least two entries")
        if not np.all(np.isfinite(arr)):
            raise ValueError("theta must be finite")
        return arr

    @property
    def n(self) -> int:
        return int(self.theta.size)

    def normalized(self) -> "PLParams":
        """Shift utilities to mean zero (the model is shift invariant)."""
        return PLParams(theta=self.theta - self.theta.mean())


class MixtureParams(BaseModel):
    """
    Parameters of a mixture of K Plackett-Luce models.

    ``thetas`` is n x K with one mean-zero column per component; ``beta`` lies
    on the probability simplex.
    """

    thetas: np.ndarray = Field(..., description="n x K utility matrix")
    beta: np.ndarray = Field(..., description="Length-K mixing probabilities")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("thetas", mode="before")
    @classmethod
    def coerce_thetas(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 1:
            raise ValueError("thetas must be an n x K matrix with n >= 2")
        if not np.all(np.isfinite(arr)):
            raise ValueError("thetas must be finite")
        # each column is stored mean-zero
        return arr - arr.mean(axis=0, keepdims=True)

    @field_validator("beta", mode="before")
    @classmethod
    def coerce_beta(cls, v) -> np.ndarray:
        arr = np.atleast_1d(np.array(v, dtype=float))
        if np.any(arr < 0) or abs(arr.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError("beta must lie on the probability simplex")
        return arr / arr.sum()

    @model_validator(mode="after")
    def check_shapes(self) -> "MixtureParams":
        if self.beta.size != self.thetas.shape[1]:
            raise ValueError("beta must have one entry per mixture component")
        return self

    @property
    def n(self) -> int:
        return int(self.thetas.shape[0])

    @property
    def K(self) -> int:
        return int(self.thetas.shape[1])

    def component(self, k: int) -> PLParams:
        return PLParams(theta=self.thetas[:, k])

    def permuted(self, order: Sequence[int]) -> "MixtureParams":
        """Reorder the components (columns of thetas and entries of beta)."""
        order = list(order)
        return MixtureParams(thetas=self.thetas[:, order], beta=self.beta[order])

    @classmethod
    def from_components(
        cls, components: Sequence[PLParams], beta: Sequence[float]
    ) -> "MixtureParams":
        return cls(thetas=np.column_stack([c.theta for c in components]), beta=np.asarray(beta))
