"""
JSON and CSV emission for fit reports, mixtures and sweep rows.

Floats are written with 17 significant digits so every double round-trips
exactly; non-finite floats become ``null`` in JSON.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
from pydantic import BaseModel

from app.schemas.ranking import MixtureParams

FLOAT_FORMAT = ".17g"


def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def _to_plain(value: Any) -> Any:
    """Convert numpy values and pydantic models to plain Python containers."""
    if isinstance(value, MixtureParams):
        return mixture_to_dict(value)
    if isinstance(value, BaseModel):
        return _to_plain(value.model_dump())
    if isinstance(value, np.ndarray):
        return _to_plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    return value


def _encode(value: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = ", " if not indent else ","

    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, (int, str)):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in value.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        # numeric vectors stay on one line
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return "[" + ", ".join(_encode(v, 0, 0) for v in value) + "]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in value]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(value: Any, indent: int = 2) -> str:
    """Serialize to JSON with 17-significant-digit floats."""
    return _encode(_to_plain(value), indent, 0)


def write_json(value: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(value) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def mixture_to_dict(mix: MixtureParams) -> Dict[str, Any]:
    """Mixture as ``{n, K, thetas (row-major n*K), beta}``."""
    return {
        "n": mix.n,
        "K": mix.K,
        "thetas": mix.thetas.ravel(order="C").tolist(),
        "beta": mix.beta.tolist(),
    }


def mixture_from_dict(data: Dict[str, Any]) -> MixtureParams:
    """
    Inverse of ``mixture_to_dict``.

    Raises:
        ValueError: If the declared dims disagree with the data
    """
    try:
        n, K = int(data["n"]), int(data["K"])
        thetas = np.asarray(data["thetas"], dtype=float)
        beta = np.asarray(data["beta"], dtype=float)
    except (KeyError, TypeError) as e:
        raise ValueError(f"invalid mixture document: {e}") from e
    if thetas.size != n * K:
        raise ValueError(f"thetas has {thetas.size} entries, expected n*K = {n * K}")
    return MixtureParams(thetas=thetas.reshape(n, K), beta=beta)


def _csv_cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(value) if math.isfinite(value) else "nan"
    return str(value)


def write_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str], path: str | Path) -> None:
    """Write rows in the given column order; floats use 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row.get(column, "")) for column in columns])


def read_csv(path: str | Path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
