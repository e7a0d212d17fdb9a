"""Range parsing and CSV/JSON writers shared by the CLI and the analyzer."""

from __future__ import annotations

import csv
import json
import logging
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, TypedDict

import numpy as np

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# Full double precision for every float written to disk.
FLOAT_FORMAT = ".17g"


class EquilibriumRow(TypedDict):
    branch: str
    n: int
    phi: float
    sin2phi: float
    cos2phi: float


class HopfRow(TypedDict):
    mu: float
    tau: float
    omega: float
    n: int
    transversality_sign: int


class LyapunovRow(TypedDict):
    mu: float
    tau: float
    omega: float
    a: float
    transversality_sign: int


def parse_mu_range(text: str) -> tuple[float, float, float]:
    """Parse ``start:step:stop`` (or a single value) into ``(start, step, stop)``."""
    parts = text.strip().split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise ConfigurationError(f"Malformed mu range '{text}', expected start:step:stop") from e

    match values:
        case [single]:
            return single, 1.0, single
        case [start, step, stop]:
            if step <= 0 or stop < start:
                raise ConfigurationError(
                    f"Malformed mu range '{text}': need step > 0 and stop >= start"
                )
            return start, step, stop
        case _:
            raise ConfigurationError(f"Malformed mu range '{text}', expected start:step:stop")


def parse_n_range(text: str) -> tuple[int, int]:
    """Parse ``lo..hi`` (inclusive) or a single integer into ``(lo, hi)``."""
    parts = text.strip().split("..")
    try:
        values = [int(p) for p in parts]
    except ValueError as e:
        raise ConfigurationError(f"Malformed n range '{text}', expected lo..hi") from e

    match values:
        case [single]:
            return single, single
        case [lo, hi] if lo <= hi:
            return lo, hi
        case _:
            raise ConfigurationError(f"Malformed n range '{text}', expected lo..hi with lo <= hi")


def parse_offsets(text: str) -> tuple[float, ...]:
    """Parse a comma separated list of delay offsets."""
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as e:
        raise ConfigurationError(
            f"Malformed offsets '{text}', expected comma separated floats"
        ) from e


def sweep_values(start: float, step: float, stop: float) -> np.ndarray:
    """Grid ``start, start + step, ...`` up to ``stop`` inclusive, free of accumulated drift."""
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def format_value(value: Any) -> str:
    """Render one CSV cell; floats keep 17 significant digits."""
    if isinstance(value, bool | np.bool_):
        return str(bool(value)).lower()
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def write_csv(
    header: Sequence[str], rows: Iterable[Sequence[Any]], path: str | Path | None = None
) -> None:
    """Write a header and rows as CSV to ``path`` or stdout."""
    if path is None:
        _write_csv_stream(header, rows, sys.stdout)
        return

    out = Path(path).expanduser()
    with open(out, "w", encoding="utf-8", newline="") as f:
        _write_csv_stream(header, rows, f)
    logger.info(f"✓ Wrote {out}")


def _write_csv_stream(header: Sequence[str], rows: Iterable[Sequence[Any]], stream: Any) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays (nested anywhere) into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(payload: Any, path: str | Path | None = None) -> None:
    """Write ``payload`` as indented JSON to ``path`` or stdout."""
    text = json.dumps(to_jsonable(payload), indent=2, ensure_ascii=False)
    if path is None:
        print(text)
        return

    out = Path(path).expanduser()
    out.write_text(text + "\n", encoding="utf-8")
    logger.info(f"✓ Wrote {out}")
