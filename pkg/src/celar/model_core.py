"""Shared model pieces: datasets, parameter containers, backshift filtering
and least squares."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import (
    DimensionError,
    InputError,
    InsufficientDataError,
    NonStationaryWarning,
    SingularDesignError,
)

RANK_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RegressionDataset:
    """Response ``y`` (length N) and design ``X`` (N x M)."""

    y: np.ndarray
    X: np.ndarray
    intercept_included: bool = False
    names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise DimensionError("y must be a vector and X a matrix")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise InputError("data contain missing or non-finite values")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "X", _frozen(X))
        names = tuple(self.names) or tuple(f"x{i + 1}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionError("one name per design column is required")
        object.__setattr__(self, "names", names)

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.X.shape[1]

    def check_order(self, p: int) -> None:
        """Raise unless there are enough conditional observations for order ``p``."""
        if p < 0:
            raise InputError("AR order must be non-negative")
        if self.n_obs < self.n_predictors + p + 2:
            raise InsufficientDataError(
                f"N={self.n_obs} is too small for M={self.n_predictors}, p={p}"
                " (need N >= M + p + 2)"
            )

    def with_intercept(self) -> "RegressionDataset":
        if self.intercept_included:
            return self
        X = np.column_stack([np.ones(self.n_obs), self.X])
        return RegressionDataset(self.y, X, True, ("const",) + self.names)

    def with_response(self, y) -> "RegressionDataset":
        return RegressionDataset(y, self.X, self.intercept_included, self.names)


@dataclass(frozen=True)
class ArModelParams:
    beta: np.ndarray
    phi: np.ndarray
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen(np.atleast_1d(self.beta)))
        object.__setattr__(self, "phi", _frozen(np.atleast_1d(self.phi)))
        s2 = float(self.sigma2)
        if not s2 > 0 or not math.isfinite(s2):
            raise InputError(f"sigma2 must be positive, got {s2}")
        object.__setattr__(self, "sigma2", s2)

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.beta, self.phi, [self.sigma2]])

    @classmethod
    def from_stacked(cls, theta, n_beta: int) -> "ArModelParams":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:n_beta], theta[n_beta:-1], theta[-1])

    def is_stationary(self) -> bool:
        return is_stationary(self.phi)

    def as_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "phi": self.phi.tolist(),
            "sigma2": self.sigma2,
        }


@dataclass(frozen=True)
class FilteredSample:
    """Rows t = p+1..N of the backshift-filtered model.

    ``fy`` and ``fX`` hold the filtered response and design; ``e_lags`` row t
    holds (e_{t-1}, ..., e_{t-p}).
    """

    fy: np.ndarray
    fX: np.ndarray
    e_lags: np.ndarray = field(repr=False)

    @property
    def n_rows(self) -> int:
        return self.fy.shape[0]

    def residuals(self, beta) -> np.ndarray:
        return self.fy - self.fX @ np.asarray(beta, dtype=float)


def is_stationary(phi) -> bool:
    """True when all roots of 1 - phi_1 z - ... - phi_p z^p lie outside the unit circle."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if phi.size == 0 or not np.any(phi):
        return True
    # roots of z^p - phi_1 z^{p-1} - ... - phi_p are the reciprocals
    inv_roots = np.roots(np.concatenate([[1.0], -phi]))
    return bool(np.all(np.abs(inv_roots) < 1.0))


def warn_if_nonstationary(phi, label: str = "estimate") -> bool:
    ok = is_stationary(phi)
    if not ok:
        warnings.warn(
            f"AR coefficients of the {label} {np.round(phi, 6).tolist()} are not stationary",
            NonStationaryWarning,
            stacklevel=3,
        )
    return ok


def _qr_lstsq(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    col_norms = np.linalg.norm(X, axis=0)
    scale = col_norms.max() if col_norms.size else 0.0
    diag = np.abs(np.diag(R))
    if X.shape[0] < X.shape[1] or scale == 0.0 or np.any(diag <= RANK_TOL * scale):
        raise SingularDesignError("design matrix is rank deficient")
    coef = np.empty(X.shape[1])
    coef[piv] = linalg.solve_triangular(R, Q.T @ y)
    return coef


def ls_fit(data: RegressionDataset) -> np.ndarray:
    """Ordinary least squares coefficients via a pivoted QR solve."""
    return _qr_lstsq(data.X, data.y)


def residual_series(data: RegressionDataset, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.n_predictors,):
        raise DimensionError(
            f"beta has shape {beta.shape}, expected ({data.n_predictors},)"
        )
    return data.y - data.X @ beta


def lag_matrix(series: np.ndarray, p: int) -> np.ndarray:
    """Rows t = p..n-1 (0-based) of (s_{t-1}, ..., s_{t-p}); works for 1-D and 2-D input."""
    n = series.shape[0]
    return np.stack([series[p - j : n - j] for j in range(1, p + 1)], axis=1)


def backshift(series: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Apply 1 - phi_1 B - ... - phi_p B^p, returning rows t = p..n-1."""
    p = phi.shape[0]
    n = series.shape[0]
    out = series[p:].copy()
    for j in range(1, p + 1):
        out = out - phi[j - 1] * series[p - j : n - j]
    return out


def apply_backshift(data: RegressionDataset, phi, beta) -> FilteredSample:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    p = phi.shape[0]
    if p < 1:
        raise InputError("backshift filtering needs p >= 1")
    if p >= data.n_obs:
        raise InsufficientDataError(f"p={p} leaves no observations (N={data.n_obs})")
    e = residual_series(data, beta)
    return FilteredSample(
        fy=backshift(data.y, phi),
        fX=backshift(data.X, phi),
        e_lags=lag_matrix(e, p),
    )


def load_csv(path, add_intercept: bool = True) -> RegressionDataset:
    """Read a dataset with a header row, one ``y`` column and numeric predictors.

    Predictors keep their file order. An all-ones predictor column is taken as
    an explicit intercept; otherwise one is prepended when ``add_intercept``.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise InputError(f"{path}: header has no 'y' column")
    if len(header) < 2:
        raise InputError(f"{path}: at least one predictor column is required")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise InputError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            try:
                v = float(cell)
            except ValueError:
                raise InputError(f"{path}:{i}: column {header[j]!r} has non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise InputError(f"{path}:{i}: column {header[j]!r} is missing")
            values[i - 2, j] = v
    yi = header.index("y")
    pred = [j for j in range(len(header)) if j != yi]
    X = values[:, pred]
    names = tuple(header[j] for j in pred)
    has_ones = bool(X.shape[0] and np.all(X[:, 0] == 1.0))
    data = RegressionDataset(values[:, yi], X, has_ones, names)
    if add_intercept and not has_ones:
        data = data.with_intercept()
    # rank is checked at load time
    if data.n_obs >= data.n_predictors:
        ls_fit(data)
    else:
        raise SingularDesignError("fewer observations than predictors")
    return data


def write_csv(data: RegressionDataset, path, include_intercept: bool = False) -> None:
    cols = list(range(data.n_predictors))
    if data.intercept_included and not include_intercept:
        cols = cols[1:]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + [data.names[j] for j in cols])
        for t in range(data.n_obs):
            w.writerow([repr(float(data.y[t]))] + [repr(float(data.X[t, j])) for j in cols])


def stack_names(data: RegressionDataset, p: int) -> list[str]:
    return [f"beta{i + 1}" for i in range(data.n_predictors)] + [
        f"phi{j + 1}" for j in range(p)
    ] + ["sigma2"]

