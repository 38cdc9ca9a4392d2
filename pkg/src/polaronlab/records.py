"""
Sweep records, log-log exponent fits and deterministic CSV/JSON output.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = ["SweepRecord", "fit_exponent", "format_number", "write_csv", "write_json", "to_jsonable"]


@dataclass
class SweepRecord:
    """One evaluated parameter point.

    ``inputs`` and ``outputs`` map column names to scalars; ``fits`` maps a
    term name to ``{slope, stderr}`` when the record summarises a fit.
    """

    kind: str
    inputs: dict
    outputs: dict
    fits: dict = field(default_factory=dict)
    version: str = ""
    config: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {f"in_{k}": v for k, v in self.inputs.items()}
        out.update(self.outputs)
        return out


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> dict:
    """Ordinary least squares of ``log y`` on ``log x``.

    Two points give the exact log-ratio with ``stderr = None``.

    Raises
    ------
    DomainError
        On fewer than two points, non-positive data or coincident ``x``.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise DomainError("need at least two (x, y) pairs of equal length")
    if np.any(x <= 0) or np.any(y <= 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("power-law fit needs strictly positive finite data")
    lx, ly = np.log(x), np.log(y)
    mx, my = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    if sxx == 0.0:
        raise DomainError("x values coincide")
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = float(my - slope * mx)
    if x.size == 2:
        return {"slope": slope, "intercept": intercept, "stderr": None}
    resid = ly - (intercept + slope * lx)
    s2 = float(np.sum(resid**2)) / (x.size - 2)
    return {"slope": slope, "intercept": intercept, "stderr": math.sqrt(s2 / sxx)}


def format_number(v) -> str:
    """17 significant digits, locale independent; integers and strings pass through."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, records: Sequence[SweepRecord]) -> Path:
    """Header row plus one row per record; columns in first-seen order, LF endings."""
    cols: list = []
    for rec in records:
        for k in rec.row():
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for rec in records:
        row = rec.row()
        buf.write(",".join(format_number(row.get(c)) for c in cols) + "\n")
    path = Path(path)
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path


def to_jsonable(obj):
    """Recursively convert to JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_bytes(dumps(obj).encode("utf-8"))
    return path
