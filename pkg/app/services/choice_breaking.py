"""
Choice breaking: decompose rankings into (winner, choice set, source) enumerations.

A ranking (a_1, ..., a_s) yields the s-1 choices "a_i is picked out of
{a_i, ..., a_s}". Multiplicities are not duplicated here; they are folded into
the enumeration weights by the weighted LSR solver.
"""

import logging
from typing import Sequence

import numpy as np

from app.schemas.estimation import ChoiceBreaking
from app.schemas.ranking import RankingDataset

logger = logging.getLogger(__name__)


def _enumeration_offsets(lengths: np.ndarray) -> np.ndarray:
    """Index of the first enumeration of every ranking."""
    counts = lengths - 1
    return np.concatenate(([0], np.cumsum(counts)[:-1])).astype(int)


def choice_breaking(dataset: RankingDataset) -> ChoiceBreaking:
    """
    Break every ranking of a dataset into its choice enumerations.

    Args:
        dataset: Full or partial rankings

    Returns:
        ChoiceBreaking with Σ_l (s_l - 1) enumerations in ranking order

    Example:
        >>> ds = RankingDataset.from_lists(3, [[2, 0, 1]])
        >>> choice_breaking(ds).enumerations
        [(2, frozenset({0, 1, 2}), 0), (0, frozenset({0, 1}), 0)]
    """
    lengths = dataset.lengths
    offsets = _enumeration_offsets(lengths)
    total = int((lengths - 1).sum())

    winners = np.empty(total, dtype=int)
    sources = np.empty(total, dtype=int)
    member_enum_parts = []
    member_item_parts = []

    # Vectorize per ranking length: position i of a length-s ranking opens
    # enumeration i, whose choice set is positions i..s-1.
    for s, (indices, items) in dataset.length_groups.items():
        choice_pos, member_pos = np.triu_indices(s)
        keep = choice_pos < s - 1
        choice_pos, member_pos = choice_pos[keep], member_pos[keep]

        enum_ids = offsets[indices][:, None] + np.arange(s - 1)[None, :]
        winners[enum_ids] = items[:, : s - 1]
        sources[enum_ids] = indices[:, None]

        member_enum_parts.append((offsets[indices][:, None] + choice_pos[None, :]).ravel())
        member_item_parts.append(items[:, member_pos].ravel())

    breaking = ChoiceBreaking(
        winners=winners,
        sources=sources,
        member_enum=np.concatenate(member_enum_parts),
        member_items=np.concatenate(member_item_parts),
        n=dataset.n,
    )
    logger.debug(f"Choice breaking: {total} enumerations from {dataset.num_rankings} rankings")
    return breaking


def expand_weights(q: Sequence[float], lengths: Sequence[int]) -> np.ndarray:
    """
    Expand per-ranking weights to per-enumeration weights.

    Ranking l contributes its weight q_l once for each of its s_l - 1 choices,
    in choice-breaking order.

    Raises:
        ValueError: If q and lengths disagree in size or a length is below 2
    """
    q = np.asarray(q, dtype=float)
    lengths = np.asarray(lengths, dtype=int)
    if q.shape != lengths.shape:
        raise ValueError(
            f"weight vector has {q.size} entries but the dataset has {lengths.size} rankings"
        )
    if np.any(lengths < 2):
        raise ValueError("every ranking must contain at least two items")
    return np.repeat(q, lengths - 1)
