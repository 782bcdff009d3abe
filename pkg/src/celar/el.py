"""Empirical likelihood inner problem.

Given estimating-function values ``G`` (one row per observation), the
probability weights are ``pi_t = 1 / (n + lambda' G_t)`` and the multiplier
``lambda`` minimizes ``l(lambda) = -sum_t log(n + lambda' G_t)``, a convex
function on the set where every denominator exceeds the domain bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DimensionError, NoSolutionError, OutOfDomainError
from .model_core import RegressionDataset, ls_fit, residual_series

logger = logging.getLogger(__name__)

DOMAIN_EPS = 1e-8


@dataclass(frozen=True)
class EstimatingFunctionMatrix:
    G: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim == 1:
            G = G[:, None]
        if G.ndim != 2:
            raise DimensionError("G must be a matrix")
        G = G.copy()
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    @property
    def n_obs(self) -> int:
        return self.G.shape[0]

    @property
    def q(self) -> int:
        return self.G.shape[1]


@dataclass(frozen=True)
class LagrangeState:
    lam: np.ndarray
    pi: np.ndarray
    inner_objective: float
    converged: bool
    iterations: int = 0
    constraint_residuals: np.ndarray | None = None
    feasible: bool = True

    @property
    def max_residual(self) -> float:
        if self.constraint_residuals is None or self.constraint_residuals.size == 0:
            return 0.0
        return float(np.max(np.abs(self.constraint_residuals)))


def _as_matrix(G) -> np.ndarray:
    if isinstance(G, EstimatingFunctionMatrix):
        return G.G
    G = np.asarray(G, dtype=float)
    return G[:, None] if G.ndim == 1 else G


def _denominators(G: np.ndarray, lam) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (G.shape[1],):
        raise DimensionError(f"lambda has shape {lam.shape}, expected ({G.shape[1]},)")
    return G.shape[0] + G @ lam


def el_weights(G, lam) -> np.ndarray:
    G = _as_matrix(G)
    d = _denominators(G, lam)
    if np.any(d <= 0):
        raise OutOfDomainError("a weight denominator is not positive")
    return 1.0 / d


def inner_objective(G, lam) -> float:
    """Sum of log weights, ``-sum log(n + lambda' G_t)``."""
    G = _as_matrix(G)
    d = _denominators(G, lam)
    if np.any(d <= 0):
        raise OutOfDomainError("a weight denominator is not positive")
    return -float(np.sum(np.log(d)))


def inner_gradient(G, lam) -> np.ndarray:
    G = _as_matrix(G)
    return -(G.T @ el_weights(G, lam))


def inner_hessian(G, lam) -> np.ndarray:
    G = _as_matrix(G)
    pi = el_weights(G, lam)
    Gw = G * pi[:, None]
    return Gw.T @ Gw


def _in_domain(d: np.ndarray, bound: float) -> bool:
    return bool(np.all(d > max(bound, DOMAIN_EPS)))


def solve_lambda(
    G,
    lambda_init=None,
    tol: float = 1e-10,
    max_iter: int = 200,
    *,
    bound: float = 1.0,
    init: str = "zero",
    damping: float = 0.5,
    max_halvings: int = 50,
) -> LagrangeState:
    """Minimize the log-EL criterion over the multipliers by damped Newton.

    Each iteration tries ``damping`` times the Newton step and halves it until
    the iterate stays inside the domain and the criterion does not increase.
    ``init="minus-n"`` starts every multiplier at ``-n`` when that point is in
    the domain. Convergence is declared when every gradient entry is below
    ``tol`` times the largest absolute entry of its column of ``G`` (floored
    at one) and the weights sum to one within 1e-12.
    A converged state whose weights do not sum to one is marked infeasible:
    zero then lies outside the convex hull of the rows.
    """
    G = _as_matrix(G)
    n, q = G.shape
    if lambda_init is None:
        lam = np.full(q, -float(n)) if init == "minus-n" else np.zeros(q)
    else:
        lam = np.array(lambda_init, dtype=float).reshape(q)
    if not _in_domain(n + G @ lam, bound):
        if lambda_init is not None or init == "minus-n":
            logger.debug("initial multipliers outside the domain; restarting from zero")
        lam = np.zeros(q)
    if not _in_domain(n + G @ lam, bound):
        raise OutOfDomainError("zero multipliers violate the domain bound (n_obs too small)")

    # per-column scale so a large-magnitude row block cannot loosen the others
    gtol = tol * np.maximum(1.0, np.max(np.abs(G), axis=0, initial=0.0))
    d = n + G @ lam
    f = -float(np.sum(np.log(d)))
    converged = False
    it = 0
    for it in range(max_iter + 1):
        pi = 1.0 / d
        grad = -(G.T @ pi)
        if not np.all(np.isfinite(grad)):
            break
        small = bool(np.all(np.abs(grad) < gtol))
        # sum(pi) - 1 = -lambda'grad / n, so keep refining until the weights normalize
        if small and abs(pi.sum() - 1.0) < 1e-12:
            converged = True
            break
        if it == max_iter:
            break
        Gw = G * pi[:, None]
        H = Gw.T @ Gw
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        t = damping
        moved = False
        for _ in range(max_halvings):
            cand = lam + t * step
            dc = n + G @ cand
            if _in_domain(dc, bound):
                fc = -float(np.sum(np.log(dc)))
                if fc <= f + 1e-14 * max(1.0, abs(f)):
                    lam, d, f = cand, dc, fc
                    moved = True
                    break
            t *= 0.5
        if not moved:
            converged = small
            break

    pi = 1.0 / d
    resid = G.T @ pi
    feasible = bool(converged and abs(pi.sum() - 1.0) < 1e-6)
    if converged and not feasible:
        converged = False
    return LagrangeState(
        lam=lam,
        pi=pi,
        inner_objective=f,
        converged=converged,
        iterations=it,
        constraint_residuals=resid,
        feasible=feasible,
    )


def zero_in_hull(G) -> bool:
    """Whether some probability vector puts the weighted row mean at zero."""
    G = _as_matrix(G)
    n = G.shape[0]
    res = optimize.linprog(
        np.zeros(n),
        A_eq=np.vstack([G.T, np.ones((1, n))]),
        b_eq=np.concatenate([np.zeros(G.shape[1]), [1.0]]),
        bounds=[(0, None)] * n,
        method="highs",
    )
    return res.status == 0


def _iid_rows(data: RegressionDataset, beta, sigma2):
    r = residual_series(data, beta)
    rows = data.X * r[:, None]
    if sigma2 is not None:
        rows = np.column_stack([rows, r * r - sigma2])
    return rows


def _iid_profile(data, theta, estimate_sigma2, lam0=None):
    M = data.n_predictors
    s2 = theta[M] if estimate_sigma2 else None
    G = _iid_rows(data, theta[:M], s2)
    state = solve_lambda(G, lam0)
    if not state.feasible:
        return -math.inf, state, None
    r = residual_series(data, theta[:M])
    lam, pi = state.lam, state.pi
    # derivative of each row's lambda'G_t with respect to (beta, sigma2)
    dr = -data.X
    u = data.X @ lam[:M]
    if estimate_sigma2:
        u = u + 2.0 * lam[M] * r
    grad_beta = -(pi @ (u[:, None] * dr))
    grad = grad_beta
    if estimate_sigma2:
        grad = np.concatenate([grad_beta, [lam[M] * pi.sum()]])
    return state.inner_objective, state, grad


def iid_el_fit(data: RegressionDataset, estimate_sigma2: bool = True):
    """EL estimate for the uncorrelated-error regression.

    Returns ``(beta, sigma2, state)``; ``sigma2`` is None when it is not estimated.
    """
    M = data.n_predictors
    beta0 = ls_fit(data)
    theta0 = beta0
    if estimate_sigma2:
        r = residual_series(data, beta0)
        theta0 = np.concatenate([beta0, [float(r @ r) / data.n_obs]])
    val, state, grad = _iid_profile(data, theta0, estimate_sigma2)
    if not state.feasible:
        raise NoSolutionError("zero is outside the convex hull of the constraint rows")

    def neg(theta):
        if estimate_sigma2 and theta[M] <= 0:
            return math.inf, np.zeros_like(theta)
        v, st, g = _iid_profile(data, theta, estimate_sigma2)
        if not st.feasible:
            return math.inf, np.zeros_like(theta)
        return -v, -g

    if np.max(np.abs(grad)) > 1e-10:
        res = optimize.minimize(neg, theta0, jac=True, method="BFGS", options={"gtol": 1e-9})
        theta = res.x
        _, state, _ = _iid_profile(data, theta, estimate_sigma2)
    else:
        theta = theta0
    return theta[:M], (float(theta[M]) if estimate_sigma2 else None), state
