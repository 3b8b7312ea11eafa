"""Input containers and validation helpers shared by all modules."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import AlignmentError, InvalidInputError


@dataclass(frozen=True)
class ReturnSeries:
    """Per-period fractional returns with ordered period labels.

    ``timestamps`` may be any sortable labels (ISO dates, integers). When
    omitted, ``0..n-1`` is used.
    """

    values: np.ndarray
    timestamps: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size < 2:
            raise InvalidInputError("a return series needs at least 2 observations")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("return series contains non-finite values")
        if self.timestamps is None:
            timestamps = np.arange(values.size)
        else:
            timestamps = np.asarray(self.timestamps)
            if timestamps.shape != values.shape:
                raise AlignmentError("timestamps and values differ in length")
            if np.any(timestamps[1:] <= timestamps[:-1]):
                raise InvalidInputError("timestamps must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class ReturnPanel:
    """T x N matrix of per-period returns, one column per asset."""

    assets: tuple
    matrix: np.ndarray
    timestamps: np.ndarray = field(default=None)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2:
            raise InvalidInputError("return panel must be two-dimensional")
        n_periods, n_assets = matrix.shape
        if len(self.assets) != n_assets:
            raise InvalidInputError("asset labels do not match matrix width")
        if not np.all(np.isfinite(matrix)):
            raise InvalidInputError("return panel contains missing or non-finite values")
        if self.timestamps is None:
            timestamps = np.arange(n_periods)
        else:
            timestamps = np.asarray(self.timestamps)
            if timestamps.shape[0] != n_periods:
                raise AlignmentError("timestamps and matrix differ in length")
        if n_periods <= n_assets:
            warnings.warn(
                f"panel has {n_periods} periods for {n_assets} assets; "
                "covariance estimates will be rank deficient",
                stacklevel=2,
            )
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "timestamps", timestamps)

    @property
    def shape(self):
        return self.matrix.shape

    def column(self, asset) -> ReturnSeries:
        j = self.assets.index(asset)
        return ReturnSeries(self.matrix[:, j], self.timestamps)


def as_values(x, name="x", min_length=2) -> np.ndarray:
    """Return a 1-D float array from a ReturnSeries or array-like."""
    if isinstance(x, ReturnSeries):
        values = x.values
    else:
        values = np.asarray(x, dtype=float).ravel()
    if values.size < min_length:
        raise InvalidInputError(f"{name} needs at least {min_length} observations, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return values


def as_aligned_pair(a, b, names=("a", "b")):
    """Return two equally long value arrays, checking timestamps when available."""
    if isinstance(a, ReturnSeries) and isinstance(b, ReturnSeries):
        if len(a) != len(b) or np.any(a.timestamps != b.timestamps):
            raise AlignmentError(f"{names[0]} and {names[1]} have different timestamps")
    va, vb = as_values(a, names[0]), as_values(b, names[1])
    if va.size != vb.size:
        raise AlignmentError(f"{names[0]} has {va.size} observations, {names[1]} has {vb.size}")
    return va, vb


def as_matrix(X, name="X") -> np.ndarray:
    if isinstance(X, ReturnPanel):
        return X.matrix
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return X


def check_order(order: int) -> int:
    if int(order) != order or order < 2 or order % 2:
        raise InvalidInputError(f"moment order must be an even integer >= 2, got {order}")
    return int(order)


def check_k(k: int) -> int:
    if int(k) != k or k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k}")
    return int(k)


def check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam > 0 or not np.isfinite(lam):
        raise InvalidInputError(f"risk appetite must be positive and finite, got {lam}")
    return lam


def check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"probability must lie in (0, 1), got {p}")
    return p


def check_correlation(rho: float) -> float:
    rho = float(rho)
    if not -1.0 <= rho <= 1.0:
        raise InvalidInputError(f"correlation must lie in [-1, 1], got {rho}")
    return rho


def as_labels(labels: Sequence | None, n: int, prefix: str) -> tuple:
    if labels is None:
        return tuple(f"{prefix}{i + 1}" for i in range(n))
    return tuple(labels)
