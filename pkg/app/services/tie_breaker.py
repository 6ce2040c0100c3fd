"""
Tie breaking for rankings with tied groups.

Small tie structures are expanded into every linear extension, each carrying an
equal share of the ranking's weight; large ones are replaced by a fixed number of
uniformly drawn extensions.
"""

import itertools
import logging
import math
from typing import List, Tuple

import numpy as np

from app.schemas.ranking import RawRankingWithTies, Ranking

logger = logging.getLogger(__name__)


def count_linear_extensions(raw: RawRankingWithTies) -> int:
    """Number of strict orders consistent with the tie groups: Π |g|!."""
    return math.prod(math.factorial(len(group)) for group in raw.groups)


def break_ties(
    raw: RawRankingWithTies, rng: np.random.Generator, max_expand: int
) -> List[Tuple[Ranking, float]]:
    """
    Replace a ranking with ties by weighted strict rankings.

    Args:
        raw: Ordered tie groups
        rng: Random generator (used only when sampling is needed)
        max_expand: Largest number of strict rankings to produce

    Returns:
        List of (ranking, weight) pairs whose weights sum to 1

    Example:
        >>> raw = RawRankingWithTies(groups=(frozenset({0}), frozenset({1, 2})))
        >>> break_ties(raw, rng, max_expand=24)
        [(Ranking(items=(0, 1, 2)), 0.5), (Ranking(items=(0, 2, 1)), 0.5)]
    """
    if max_expand < 1:
        raise ValueError("max_expand must be at least 1")

    groups = [sorted(group) for group in raw.groups]
    total = count_linear_extensions(raw)

    if total <= max_expand:
        extensions = [
            tuple(itertools.chain.from_iterable(parts))
            for parts in itertools.product(*(itertools.permutations(g) for g in groups))
        ]
        weight = 1.0 / total
        return [(Ranking(items=items), weight) for items in extensions]

    logger.debug(f"Sampling {max_expand} of {total} linear extensions")
    weight = 1.0 / max_expand
    sampled = []
    for _ in range(max_expand):
        items = tuple(
            int(item) for g in groups for item in (rng.permutation(g) if len(g) > 1 else g)
        )
        sampled.append((Ranking(items=items), weight))
    return sampled
