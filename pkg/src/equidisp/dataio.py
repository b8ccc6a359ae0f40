"""CSV ingestion for paired and single-column numeric data."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .equidisp_model import Sample2D

__all__ = ["InputError", "read_columns", "read_pairs", "read_column", "write_pairs"]


class InputError(ValueError):
    """The input file is missing, malformed or has unusable content."""


def _resolve(header: list[str], name: Optional[str], default: int, path) -> int:
    if name is None:
        if default >= len(header):
            raise InputError(f"{path}: need at least {default + 1} columns, header has {len(header)}")
        return default
    if name in header:
        return header.index(name)
    raise InputError(f"{path}: no column named {name!r}; header is {header}")


def read_columns(path: Union[str, Path], names: list[Optional[str]]) -> list[np.ndarray]:
    """Read numeric columns from a CSV with a header row.

    ``names[k]`` selects a column by header name; ``None`` means the ``k``-th
    column.  Every data row must hold a finite number in each selected
    column; the first offending row is reported by its 1-based line number.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: file is empty") from None
        except csv.Error as exc:
            raise InputError(f"{path}: {exc}") from exc
        idx = [_resolve(header, nm, k, path) for k, nm in enumerate(names)]
        cols: list[list[float]] = [[] for _ in idx]
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                for k, j in enumerate(idx):
                    if j >= len(row) or not row[j].strip():
                        raise InputError(f"{path}:{line}: missing value in column {header[j]!r}")
                    try:
                        v = float(row[j])
                    except ValueError:
                        raise InputError(
                            f"{path}:{line}: non-numeric value {row[j]!r} in column {header[j]!r}"
                        ) from None
                    if not math.isfinite(v):
                        raise InputError(f"{path}:{line}: non-finite value in column {header[j]!r}")
                    cols[k].append(v)
        except csv.Error as exc:
            raise InputError(f"{path}:{reader.line_num}: {exc}") from exc
    return [np.array(c, dtype=float) for c in cols]


def read_pairs(path, x_col: Optional[str] = None, y_col: Optional[str] = None,
               min_rows: int = 3) -> Sample2D:
    x, y = read_columns(path, [x_col, y_col])
    if x.size < min_rows:
        raise InputError(f"{path}: need at least {min_rows} data rows, found {x.size}")
    return Sample2D(x, y)


def read_column(path, col: Optional[str] = None, min_rows: int = 2) -> np.ndarray:
    (x,) = read_columns(path, [col])
    if x.size < min_rows:
        raise InputError(f"{path}: need at least {min_rows} data rows, found {x.size}")
    return x


def write_pairs(path, s: Sample2D) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in zip(s.x, s.y):
            w.writerow([repr(float(x)), repr(float(y))])
