"""Incomplete samples, MCAR amputation, complete cases and CSV I/O."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParseError, RaggedRows

MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class IncompleteMatrix:
    """An ``n x d`` sample with its response-indicator mask.

    ``mask[j, k]`` is True when entry ``(j, k)`` is observed.  Values at
    unobserved positions are arbitrary and are never read by any
    computation in this package.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if values.shape != mask.shape:
            raise ValueError(f"values {values.shape} and mask {mask.shape} differ in shape")
        values.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def complete(cls, values) -> "IncompleteMatrix":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool))

    @classmethod
    def from_nan(cls, values) -> "IncompleteMatrix":
        """Build from an array where NaN marks a missing entry."""
        values = np.asarray(values, dtype=float)
        return cls(values, ~np.isnan(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def filled(self, fill=np.nan) -> np.ndarray:
        """Copy of the values with unobserved entries replaced by ``fill``."""
        return np.where(self.mask, self.values, fill)

    def observed_counts(self) -> np.ndarray:
        return self.mask.sum(axis=0)


@dataclass(frozen=True)
class PerColumn:
    """Each entry of column ``k`` is observed independently with prob. ``q[k]``."""

    q: tuple[float, ...]

    def __post_init__(self):
        q = tuple(float(v) for v in np.atleast_1d(self.q))
        if any(not 0.0 <= v <= 1.0 for v in q):
            raise ValueError("observation probabilities must lie in [0, 1]")
        object.__setattr__(self, "q", q)

    @property
    def label(self) -> str:
        return "q=" + "/".join(f"{v:g}" for v in self.q)


@dataclass(frozen=True)
class RowThenValue:
    """Two-stage mechanism.

    A row is incomplete with probability ``p_row``; inside an incomplete
    row each value is missing independently with probability ``p_value``.
    """

    p_row: float
    p_value: float

    def __post_init__(self):
        for name in ("p_row", "p_value"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
            object.__setattr__(self, name, v)

    @property
    def label(self) -> str:
        return f"{self.p_row:g}/{self.p_value:g}"


MissingnessSpec = Union[PerColumn, RowThenValue]


@dataclass(frozen=True)
class CompleteCaseView:
    rows: np.ndarray
    n_hat: int
    original_indices: np.ndarray


def ampute_mcar(data, spec: MissingnessSpec, rng: np.random.Generator) -> IncompleteMatrix:
    """Delete entries of a complete matrix completely at random.

    The mask is drawn without looking at ``data``; the number of random
    draws depends only on the shape, so the same generator state gives the
    same mask for any data of that shape.
    """
    data = np.asarray(data, dtype=float)
    n, d = data.shape
    if n < 1:
        raise ValueError("need at least one row")
    if isinstance(spec, PerColumn):
        if len(spec.q) != d:
            raise ValueError(f"q has {len(spec.q)} entries for {d} columns")
        mask = rng.random((n, d)) < np.asarray(spec.q)
    elif isinstance(spec, RowThenValue):
        row_hit = rng.random(n) < spec.p_row
        value_hit = rng.random((n, d)) < spec.p_value
        mask = ~(row_hit[:, None] & value_hit)
    else:
        raise TypeError(f"unknown missingness spec {spec!r}")
    return IncompleteMatrix(data, mask)


def complete_cases(data: IncompleteMatrix) -> CompleteCaseView:
    keep = data.mask.all(axis=1)
    idx = np.flatnonzero(keep)
    return CompleteCaseView(rows=data.values[idx], n_hat=int(idx.size), original_indices=idx)


def _parse_cell(text: str, row: int, col: int) -> float:
    text = text.strip()
    if text in MISSING_TOKENS:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", row=row, column=col) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", row=row, column=col)
    return value


def parse_csv(text: str, header: bool = False) -> IncompleteMatrix:
    """Parse CSV text; empty cells and ``NA`` mark missing values.

    Rows and columns in error messages are 1-based line/field numbers.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    start = 1 if header else 0
    rows = []
    width = None
    for lineno, fields in enumerate(csv.reader(lines[start:]), start=start + 1):
        if not fields:
            # a blank line inside the data is a single missing cell
            fields = [""]
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise RaggedRows(f"expected {width} fields, got {len(fields)}", row=lineno)
        rows.append([_parse_cell(f, lineno, k + 1) for k, f in enumerate(fields)])
    if not rows:
        raise ParseError("no data rows")
    values = np.array(rows, dtype=float)
    mask = ~np.isnan(values)
    return IncompleteMatrix(values, mask)


def read_csv(path: str | os.PathLike, header: bool = False) -> IncompleteMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh.read(), header=header)


def format_csv(data: IncompleteMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for vals, obs in zip(data.values, data.mask):
        writer.writerow([repr(float(v)) if o else "" for v, o in zip(vals, obs)])
    return buf.getvalue()


def write_csv(data: IncompleteMatrix, path: str | os.PathLike) -> None:
    """Write with missing cells as empty strings; floats round-trip exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(data))
