"""Mean, median and k-nearest-neighbour imputation."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numba
import numpy as np

from .dataset import IncompleteMatrix
from .errors import EmptyColumn, NoDonor


@dataclass(frozen=True)
class Mean:
    label = "mean"


@dataclass(frozen=True)
class Median:
    label = "median"


@dataclass(frozen=True)
class Knn:
    """Fill from the ``k`` nearest donor rows.

    ``aggregate`` combines the donors' values: ``"mean"`` or ``"median"``.
    ``fallback`` decides what happens to an entry whose row shares no
    observed coordinate with any donor (e.g. a fully missing row):
    ``"mean"`` uses the available-case column mean, ``"error"`` raises
    :class:`NoDonor`.
    """

    k: int
    aggregate: str = "mean"
    fallback: str = "mean"

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError("k must be at least 1")
        if self.aggregate not in ("mean", "median"):
            raise ValueError(f"unknown kNN aggregate {self.aggregate!r}")
        if self.fallback not in ("mean", "error"):
            raise ValueError(f"unknown kNN fallback {self.fallback!r}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def label(self) -> str:
        return f"knn{self.k}"


ImputationMethod = Union[Mean, Median, Knn]

_KNN_RE = re.compile(r"^knn(\d+)$")


def parse_method(name: str, knn_aggregate: str = "mean") -> ImputationMethod:
    """Parse ``mean``, ``median`` or ``knn<k>`` (e.g. ``knn6``)."""
    key = name.strip().lower()
    if key == "mean":
        return Mean()
    if key == "median":
        return Median()
    m = _KNN_RE.match(key)
    if m:
        return Knn(int(m.group(1)), aggregate=knn_aggregate)
    raise ValueError(f"unknown imputation method {name!r}")


def _check_columns(data: IncompleteMatrix) -> np.ndarray:
    counts = data.observed_counts()
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyColumn(f"column(s) {empty.tolist()} have no observed values")
    return counts


@numba.njit(cache=True)
def _knn_fill(x, mask, k, use_median):
    """Return (filled, orphan); orphan marks entries left without donors."""
    n, d = x.shape
    out = x.copy()
    orphan = np.zeros((n, d), dtype=np.bool_)
    dist = np.empty(n)
    ok = np.empty(n, dtype=np.bool_)
    for j in range(n):
        complete = True
        for c in range(d):
            if not mask[j, c]:
                complete = False
                break
        if complete:
            continue
        for i in range(n):
            shared = 0
            acc = 0.0
            if i != j:
                for c in range(d):
                    if mask[j, c] and mask[i, c]:
                        diff = x[j, c] - x[i, c]
                        acc += diff * diff
                        shared += 1
            ok[i] = shared > 0
            dist[i] = np.sqrt(acc) / shared if shared > 0 else np.inf
        # stable sort keeps lower row index first on ties
        order = np.argsort(dist, kind="mergesort")
        for c in range(d):
            if mask[j, c]:
                continue
            vals = np.empty(k)
            m = 0
            for idx in range(n):
                i = order[idx]
                if not ok[i]:
                    break
                if mask[i, c]:
                    vals[m] = x[i, c]
                    m += 1
                    if m == k:
                        break
            if m == 0:
                orphan[j, c] = True
            elif use_median:
                out[j, c] = np.median(vals[:m])
            else:
                out[j, c] = vals[:m].mean()
    return out, orphan


def impute(data: IncompleteMatrix, method: ImputationMethod) -> np.ndarray:
    """Return a fully observed copy of ``data``; observed entries are unchanged.

    Mean and median fill each missing entry with the available-case mean or
    median of its column.  kNN uses donors that observe the target column;
    the distance between two rows is the Euclidean distance over the
    coordinates observed in both, divided by the number of such
    coordinates, with ties resolved toward the lower row index.  Fewer than
    ``k`` donors are used when fewer exist.
    """
    mask = data.mask
    _check_columns(data)
    if mask.all():
        return np.array(data.values)
    if isinstance(method, Mean):
        x = data.filled(0.0)
        return np.where(mask, x, x.sum(axis=0) / mask.sum(axis=0))
    if isinstance(method, Median):
        x = data.filled(0.0)
        fill = np.array([np.median(x[mask[:, c], c]) for c in range(data.d)])
        return np.where(mask, x, fill)
    if isinstance(method, Knn):
        x = data.filled(0.0)
        out, orphan = _knn_fill(x, mask, method.k, method.aggregate == "median")
        if orphan.any():
            if method.fallback == "error":
                row = int(np.flatnonzero(orphan.any(axis=1))[0])
                raise NoDonor(f"row {row} shares no observed coordinate with any donor")
            out = np.where(orphan, x.sum(axis=0) / mask.sum(axis=0), out)
        return out
    raise TypeError(f"unknown imputation method {method!r}")


def fitted_mean(data: IncompleteMatrix, method: ImputationMethod) -> np.ndarray:
    """Column means of the imputed dataset."""
    return impute(data, method).mean(axis=0)
