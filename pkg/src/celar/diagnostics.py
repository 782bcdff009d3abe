"""Residual diagnostics: Durbin-Watson, ACF, PACF and normal Q-Q pairs."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import InputError, UndefinedStatisticError
from .model_core import RegressionDataset, ls_fit, residual_series


@dataclass(frozen=True)
class DiagnosticsReport:
    dw: float
    acf: np.ndarray
    pacf: np.ndarray
    n: int
    dl: float | None = None
    du: float | None = None

    @property
    def dw_decision(self) -> str | None:
        """Positive-autocorrelation decision against user-supplied bounds."""
        if self.dl is None or self.du is None:
            return None
        if self.dw < self.dl:
            return "positive autocorrelation"
        if self.dw > self.du:
            return "no positive autocorrelation"
        return "inconclusive"

    def as_dict(self) -> dict:
        out = {
            "dw": self.dw,
            "acf": self.acf.tolist(),
            "pacf": self.pacf.tolist(),
            "n": self.n,
        }
        if self.dl is not None and self.du is not None:
            out.update(dl=self.dl, du=self.du, dw_decision=self.dw_decision)
        return out


def durbin_watson(residuals) -> float:
    e = np.asarray(residuals, dtype=float)
    if e.ndim != 1 or e.shape[0] < 2:
        raise InputError("Durbin-Watson needs at least two residuals")
    ss = float(e @ e)
    if ss == 0.0:
        raise UndefinedStatisticError("Durbin-Watson is undefined for an all-zero residual vector")
    d = np.diff(e)
    return float(d @ d) / ss


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 1..max_lag, each autocovariance divided by n."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if max_lag < 1 or max_lag >= n:
        raise InputError(f"max_lag must be in [1, {n - 1}], got {max_lag}")
    xc = x - x.mean()
    c0 = float(xc @ xc)
    if c0 <= 1e-300 or np.ptp(x) == 0.0:
        raise UndefinedStatisticError("autocorrelation is undefined for a constant series")
    return np.array([float(xc[k:] @ xc[:-k]) / c0 for k in range(1, max_lag + 1)])


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations by the Durbin-Levinson recursion."""
    rho = acf(series, max_lag)
    out = np.empty(max_lag)
    phi = np.zeros(0)
    v = 1.0
    for k in range(1, max_lag + 1):
        if k == 1:
            a = rho[0]
        else:
            a = (rho[k - 1] - phi @ rho[k - 2 :: -1]) / v
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        v *= 1.0 - a * a
        out[k - 1] = a
        if v <= 0:
            out[k:] = np.nan
            break
    return out


def qq_pairs(residuals) -> tuple[np.ndarray, np.ndarray]:
    """(theoretical, sample) quantiles of the standardized residuals."""
    e = np.sort(np.asarray(residuals, dtype=float))
    n = e.shape[0]
    sd = e.std(ddof=1)
    if not sd > 0:
        raise UndefinedStatisticError("Q-Q pairs need residuals with positive spread")
    nd = NormalDist()
    theo = np.array([nd.inv_cdf((i + 0.5) / n) for i in range(n)])
    return theo, (e - e.mean()) / sd


def diagnose(
    data: RegressionDataset,
    max_lag: int | None = None,
    dl: float | None = None,
    du: float | None = None,
) -> tuple[DiagnosticsReport, np.ndarray]:
    """LS fit followed by residual diagnostics; returns the report and residuals."""
    e = residual_series(data, ls_fit(data))
    n = e.shape[0]
    if max_lag is None:
        max_lag = min(10, n - 1)
    report = DiagnosticsReport(
        dw=durbin_watson(e),
        acf=acf(e, max_lag),
        pacf=pacf(e, max_lag),
        n=n,
        dl=dl,
        du=du,
    )
    return report, e
