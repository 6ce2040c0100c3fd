"""
PrefLib-style election files (soc / soi) to and from ranking datasets.
Handles header metadata, the item-name interner and tie expansion.
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.config import get_settings
from app.exceptions import SocFormatError
from app.schemas.ranking import RankingDataset, RawRankingWithTies
from app.services.tie_breaker import break_ties

logger = logging.getLogger(__name__)

# Constants
NUM_ALTERNATIVES_RE = re.compile(r"^#\s*NUMBER ALTERNATIVES\s*:\s*(\S+)\s*$", re.IGNORECASE)
ALTERNATIVE_NAME_RE = re.compile(r"^#\s*ALTERNATIVE NAME\s+(\d+)\s*:\s*(.*?)\s*$", re.IGNORECASE)


def _format_count(count: float) -> str:
    """Integral counts print as integers, fractional ones with 17 significant digits."""
    if float(count).is_integer():
        return str(int(count))
    return format(count, ".17g")


def _parse_id(token: str, n: int, line_number: int) -> int:
    try:
        item = int(token)
    except ValueError:
        raise SocFormatError(f"invalid item id {token!r}", line_number)
    if not 1 <= item <= n:
        raise SocFormatError(f"item id {item} out of range [1, {n}]", line_number)
    return item - 1


def parse_order(text: str, n: int, line_number: int) -> RawRankingWithTies:
    """
    Parse ``a,b,{c,d},e`` (1-based ids) into 0-based tie groups.

    Raises:
        SocFormatError: Bad id, unbalanced braces or a repeated item
    """
    groups: List[frozenset] = []
    seen: set = set()
    rest = text.strip()
    while rest:
        if rest.startswith("{"):
            close = rest.find("}")
            if close < 0:
                raise SocFormatError("unbalanced '{' in ranking", line_number)
            tokens = [t.strip() for t in rest[1:close].split(",") if t.strip()]
            rest = rest[close + 1 :].strip()
        else:
            head, sep, tail = rest.partition(",")
            if "{" in head or "}" in head:
                raise SocFormatError("malformed tie group", line_number)
            tokens, rest = [head.strip()], sep + tail
        if not tokens:
            raise SocFormatError("empty tie group", line_number)

        group = [_parse_id(token, n, line_number) for token in tokens]
        if seen.intersection(group) or len(set(group)) != len(group):
            raise SocFormatError("duplicate item in ranking", line_number)
        seen.update(group)
        groups.append(frozenset(group))

        if rest:
            if not rest.startswith(","):
                raise SocFormatError("expected ',' between ranking positions", line_number)
            rest = rest[1:].strip()
            if not rest:
                raise SocFormatError("trailing ',' in ranking", line_number)

    if not groups:
        raise SocFormatError("empty ranking", line_number)
    return RawRankingWithTies(groups=tuple(groups))


def parse_soc(
    text: str,
    rng: Optional[np.random.Generator] = None,
    max_expand: Optional[int] = None,
) -> RankingDataset:
    """
    Parse PrefLib soc/soi contents into a RankingDataset.

    Lines starting with '#' are metadata; ``# NUMBER ALTERNATIVES: n`` sets n and
    ``# ALTERNATIVE NAME i: name`` fills the item-name interner. Data lines read
    ``count: a,b,c`` with 1-based ids. Tied groups ``{a,b}`` are expanded into
    linear extensions whose weights multiply the count. Rankings with fewer
    than two items carry no comparison and are skipped.

    Args:
        text: File contents
        rng: Random generator for sampled tie expansions (default seed 0)
        max_expand: Linear-extension budget per line (default TIE_MAX_EXPAND)

    Returns:
        RankingDataset with real-valued multiplicities

    Raises:
        SocFormatError: With the offending line number

    Example:
        >>> parse_soc("# NUMBER ALTERNATIVES: 3\\n2: 1,2,3\\n").rankings
        [Ranking(items=(0, 1, 2))]
    """
    rng = rng or np.random.default_rng(0)
    max_expand = max_expand or get_settings().TIE_MAX_EXPAND

    n: Optional[int] = None
    names: Dict[int, str] = {}
    orders: List[Tuple[int, ...]] = []
    counts: List[float] = []
    skipped = 0

    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue

        if line.startswith("#"):
            if match := NUM_ALTERNATIVES_RE.match(line):
                try:
                    n = int(match.group(1))
                except ValueError:
                    raise SocFormatError("invalid number of alternatives", line_number)
                if n < 2:
                    raise SocFormatError("need at least two alternatives", line_number)
            elif match := ALTERNATIVE_NAME_RE.match(line):
                names[int(match.group(1))] = match.group(2)
            continue

        if n is None:
            raise SocFormatError("missing '# NUMBER ALTERNATIVES' header", line_number)

        count_text, sep, order_text = line.partition(":")
        if not sep:
            raise SocFormatError("expected 'count: ranking'", line_number)
        try:
            count = float(count_text)
        except ValueError:
            raise SocFormatError(f"invalid count {count_text.strip()!r}", line_number)
        if not np.isfinite(count) or count <= 0:
            raise SocFormatError("count must be positive", line_number)

        raw = parse_order(order_text, n, line_number)
        if sum(len(group) for group in raw.groups) < 2:
            skipped += 1
            continue

        if raw.has_ties:
            expanded = [(r.items, weight) for r, weight in break_ties(raw, rng, max_expand)]
        else:
            expanded = [(tuple(next(iter(g)) for g in raw.groups), 1.0)]

        for items, weight in expanded:
            orders.append(items)
            counts.append(count * weight)

    if n is None:
        raise SocFormatError("missing '# NUMBER ALTERNATIVES' header")
    if not orders:
        raise SocFormatError("file contains no rankings")
    if skipped:
        logger.warning(f"Skipped {skipped} rankings with fewer than two items")
    for index in names:
        if not 1 <= index <= n:
            raise SocFormatError(f"alternative name for unknown item {index}")

    item_names = None
    if names:
        item_names = [names.get(i + 1, str(i + 1)) for i in range(n)]

    logger.info(f"Parsed {len(orders)} rankings over {n} items (total weight {sum(counts):g})")
    return RankingDataset.from_lists(n, orders, multiplicities=counts, item_names=item_names)


def write_soc(dataset: RankingDataset) -> str:
    """
    Serialize a dataset as PrefLib text (soc when every ranking is full, else soi).

    Metadata is normalized to the headers this module reads; data lines keep the
    dataset's ranking order so that parsing the output gives back the same dataset.
    """
    n = dataset.n
    lines = [
        f"# DATA TYPE: {'soc' if dataset.is_full else 'soi'}",
        f"# NUMBER ALTERNATIVES: {n}",
        f"# NUMBER VOTERS: {_format_count(dataset.m)}",
        f"# NUMBER UNIQUE ORDERS: {dataset.num_rankings}",
    ]
    if dataset.item_names is not None:
        lines.extend(
            f"# ALTERNATIVE NAME {i + 1}: {name}" for i, name in enumerate(dataset.item_names)
        )

    for ranking, count in zip(dataset.rankings, dataset.weights):
        lines.append(f"{_format_count(count)}: {','.join(str(i + 1) for i in ranking.items)}")
    return "\n".join(lines) + "\n"


def read_soc(path: str | Path, rng: Optional[np.random.Generator] = None) -> RankingDataset:
    """Read and parse a PrefLib file from disk."""
    return parse_soc(Path(path).read_text(encoding="utf-8"), rng=rng)


def save_soc(dataset: RankingDataset, path: str | Path) -> None:
    """Write a dataset to disk in PrefLib format."""
    Path(path).write_text(write_soc(dataset), encoding="utf-8")
