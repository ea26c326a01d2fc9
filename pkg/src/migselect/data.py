"""Dataset container with an explicit missingness mask.

Missing cells are tracked by a boolean mask rather than sentinel values,
so observed entries are preserved bit-exactly and estimators can be
checked never to dereference a missing cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateColumnError(ValueError):
    """A column has fewer than two distinct observed values."""

    def __init__(self, column: int, name: str):
        self.column = column
        self.name = name
        super().__init__(f"column {name!r} (index {column}) is constant over its observed entries")


@dataclass(frozen=True)
class Dataset:
    """Regression data (y, X) with a missingness mask on X.

    Parameters
    ----------
    y : (n,) array
        Response; must be fully observed and finite.
    X : (n, p) array
        Covariates. Values at masked positions are undefined and must
        never be read.
    mask : (n, p) bool array
        True marks a missing cell.
    names : tuple of str
        Column labels, length p.
    """

    y: np.ndarray
    X: np.ndarray
    mask: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if y.ndim != 1 or X.ndim != 2:
            raise ValueError("y must be 1-d and X 2-d")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if y.shape[0] != n:
            raise ValueError("y length does not match X rows")
        if mask.shape != X.shape:
            raise ValueError("mask shape must equal X shape")
        if not np.all(np.isfinite(y)):
            raise ValueError("response contains missing or non-finite values")
        names = tuple(self.names)
        if len(names) != p:
            raise ValueError("names length must equal number of columns")
        for arr in (y, X, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class StandardizeParams:
    """Per-column observed-entry mean and sample sd used to standardize."""

    mean: np.ndarray
    sd: np.ndarray
    y_mean: float = 0.0
    y_sd: float = 1.0
    includes_y: bool = False


def complete_cases(ds: Dataset) -> np.ndarray:
    """Ascending indices of rows with no missing cell in any column."""
    return np.flatnonzero(~ds.mask.any(axis=1))


def rows_observed_on(ds: Dataset, cols) -> np.ndarray:
    """Ascending indices of rows fully observed on every column in `cols`.

    An empty `cols` imposes no condition and returns all rows.
    """
    cols = np.asarray(sorted(cols), dtype=int)
    if cols.size == 0:
        return np.arange(ds.n)
    return np.flatnonzero(~ds.mask[:, cols].any(axis=1))


def observed_column_stats(ds: Dataset, j: int) -> tuple[float, float]:
    """(mean, sample sd) of column j over observed entries only."""
    vals = ds.X[~ds.mask[:, j], j]
    if vals.size < 2 or np.ptp(vals) == 0.0:
        raise DegenerateColumnError(j, ds.names[j])
    return float(vals.mean()), float(vals.std(ddof=1))


def standardize(ds: Dataset, include_y: bool = False) -> tuple[Dataset, StandardizeParams]:
    """Center/scale each column to observed mean 0 and sample sd 1.

    Statistics are computed over observed entries only; the mask is
    unchanged. Masked cells are transformed along with the rest of the
    column, which is immaterial because they are never read.
    """
    means = np.empty(ds.p)
    sds = np.empty(ds.p)
    for j in range(ds.p):
        means[j], sds[j] = observed_column_stats(ds, j)
    with np.errstate(invalid="ignore"):
        Xs = (ds.X - means) / sds
    y = ds.y
    y_mean, y_sd = 0.0, 1.0
    if include_y:
        y_mean = float(ds.y.mean())
        y_sd = float(ds.y.std(ddof=1))
        if y_sd == 0.0:
            raise DegenerateColumnError(-1, "<response>")
        y = (ds.y - y_mean) / y_sd
    params = StandardizeParams(mean=means, sd=sds, y_mean=y_mean, y_sd=y_sd, includes_y=include_y)
    return Dataset(y=y, X=Xs, mask=ds.mask, names=ds.names), params
