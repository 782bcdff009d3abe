"""Conditional maximum likelihood under normal innovations.

The estimating equations are solved by cycling a generalized least squares
step for ``beta``, a lagged-residual regression for ``phi`` and the mean
squared filtered residual for ``sigma2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateResidualError, DimensionError, InsufficientDataError
from .model_core import (
    ArModelParams,
    FilteredSample,
    RegressionDataset,
    _qr_lstsq,
    apply_backshift,
    lag_matrix,
    ls_fit,
    residual_series,
    warn_if_nonstationary,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AutocovMatrices:
    R: np.ndarray
    R0: np.ndarray


@dataclass(frozen=True)
class CmlFitResult:
    params: ArModelParams
    iterations: int
    converged: bool
    conditional_loglik: float
    loglik_trace: tuple[float, ...] = field(default=(), repr=False)


def build_autocov(e, p: int) -> AutocovMatrices:
    """Cross products of the lagged residuals over t = p+1..N."""
    e = np.asarray(e, dtype=float)
    if e.ndim != 1:
        raise DimensionError("residuals must be a vector")
    if p < 1 or e.shape[0] <= 2 * p:
        raise InsufficientDataError(f"need N > 2p, got N={e.shape[0]}, p={p}")
    lags = lag_matrix(e, p)
    R = lags.T @ lags
    R = 0.5 * (R + R.T)
    return AutocovMatrices(R=R, R0=lags.T @ e[p:])


def cml_beta_update(filtered: FilteredSample) -> np.ndarray:
    return _qr_lstsq(filtered.fX, filtered.fy)


def cml_sigma2_update(filtered: FilteredSample, beta) -> float:
    r = filtered.residuals(beta)
    return float(r @ r) / filtered.n_rows


def cml_phi_update(e, p: int) -> np.ndarray:
    """Solve R phi = R0; a singular R gets one small ridge before giving up."""
    ac = build_autocov(e, p)
    R = ac.R
    try:
        return _solve_spd(R, ac.R0)
    except np.linalg.LinAlgError:
        ridge = 1e-10 * np.trace(R) / p
        if ridge > 0:
            try:
                return _solve_spd(R + ridge * np.eye(p), ac.R0)
            except np.linalg.LinAlgError:
                pass
    raise DegenerateResidualError("lagged residual cross-product matrix is singular")


def _solve_spd(R: np.ndarray, b: np.ndarray) -> np.ndarray:
    scale = np.abs(np.diag(R)).max(initial=0.0)
    if scale == 0.0 or np.linalg.cond(R) > 1e14:
        raise np.linalg.LinAlgError("singular")
    return np.linalg.solve(R, b)


def conditional_loglik(data: RegressionDataset, params: ArModelParams) -> float:
    """Normal conditional log-likelihood without its additive constant."""
    f = apply_backshift(data, params.phi, params.beta)
    r = f.residuals(params.beta)
    n = f.n_rows
    return -0.5 * n * math.log(params.sigma2) - 0.5 * float(r @ r) / params.sigma2


def default_init(data: RegressionDataset, p: int) -> ArModelParams:
    """Least squares start: LS beta, phi from LS residuals, sigma2 from the
    filtered LS residuals."""
    data.check_order(p)
    beta = ls_fit(data)
    e = residual_series(data, beta)
    phi = cml_phi_update(e, p)
    s2 = cml_sigma2_update(apply_backshift(data, phi, beta), beta)
    if not s2 > 0:
        s2 = max(float(e @ e) / data.n_obs, 1e-12)
    return ArModelParams(beta, phi, max(s2, 1e-12))


def cml_fit(
    data: RegressionDataset,
    p: int,
    init: ArModelParams | None = None,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> CmlFitResult:
    data.check_order(p)
    if init is None:
        init = default_init(data, p)
    if init.beta.shape != (data.n_predictors,) or init.phi.shape != (p,):
        raise DimensionError("initial values do not match (M, p)")

    beta, phi, s2 = init.beta.copy(), init.phi.copy(), init.sigma2
    trace = [conditional_loglik(data, init)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        filtered = apply_backshift(data, phi, beta)
        beta_new = cml_beta_update(filtered)
        e = residual_series(data, beta_new)
        phi_new = cml_phi_update(e, p)
        s2_new = cml_sigma2_update(apply_backshift(data, phi_new, beta_new), beta_new)
        if s2_new <= 0:
            raise DegenerateResidualError("filtered residuals vanish; sigma2 is zero")
        change = np.max(np.abs(np.concatenate([beta_new - beta, phi_new - phi, [s2_new - s2]])))
        beta, phi, s2 = beta_new, phi_new, s2_new
        ll = conditional_loglik(data, ArModelParams(beta, phi, s2))
        if ll < trace[-1] - 1e-9 * max(1.0, abs(trace[-1])):
            logger.warning("conditional log-likelihood decreased at iteration %d", it)
        trace.append(ll)
        if change < tol:
            converged = True
            break

    params = ArModelParams(beta, phi, s2)
    warn_if_nonstationary(phi, "CML estimate")
    if not converged:
        logger.info("CML iteration stopped after %d iterations without converging", it)
    return CmlFitResult(params, it, converged, trace[-1], tuple(trace))
