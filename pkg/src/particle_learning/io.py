"""CSV reading and writing with full-precision floats.

Floats are written with 17 significant digits so that parsing the file
reproduces the in-memory values exactly.
"""
from __future__ import annotations

import csv
import math

import numpy as np

from .errors import InvalidData


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    """Write ``rows`` (an iterable of sequences or a 2-d array) under ``header``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    """Return ``(header, rows)`` with numeric cells converted to int or float."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise InvalidData(f"{path}: empty file") from None
        rows = [[_parse(c) for c in row] for row in r if row]
    return header, rows


def _parse(cell):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def read_observations(path):
    """Observations from a CSV with columns ``y1`` (and ``y2``).

    Returns
    -------
    ndarray, shape (T,) or (T, 2)
    """
    header, rows = read_csv(path)
    cols = [c for c in ("y1", "y2") if c in header]
    if not cols:
        raise InvalidData(f"{path}: no y1 column in header {header}")
    idx = [header.index(c) for c in cols]
    try:
        y = np.array([[float(row[i]) for i in idx] for row in rows], dtype=np.float64)
    except (ValueError, IndexError, TypeError):
        raise InvalidData(f"{path}: malformed observation rows") from None
    if y.shape[0] == 0:
        raise InvalidData(f"{path}: no observations")
    if not np.all(np.isfinite(y)):
        raise InvalidData(f"{path}: non-finite observations")
    return y[:, 0] if len(cols) == 1 else y


def isclose_rows(a, b):
    """Exact equality of parsed rows (NaN equal to NaN)."""
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        if len(ra) != len(rb):
            return False
        for x, y in zip(ra, rb):
            if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
                continue
            if x != y:
                return False
    return True


__all__ = ["write_csv", "read_csv", "read_observations"]
