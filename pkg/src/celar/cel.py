"""Conditional empirical likelihood for regression with AR(p) errors.

For each t = p+1..N the estimating-function row is

    [ r_t * Phi(B)x_t ,  r_t * e_{t,p} ,  r_t**2 - sigma2 ]

with ``r_t = Phi(B)y_t - beta' Phi(B)x_t``. The multipliers are profiled out
by :func:`celar.el.solve_lambda` and the resulting profile log-EL is raised by
alternating a multiplier solve with block moves on phi, beta and sigma2 built
from derivatives at the fixed multipliers.

With ``step_rule="block-newton"`` a block moves by half a Newton step on the
fixed-multiplier criterion when its Hessian is negative definite, and
otherwise by its part of the ascent step in the metric ``n Jbar' S^-1 Jbar``
(``Jbar`` is the weighted mean Jacobian of the rows, ``S`` their weighted
second moment).

The default ``"gauss-newton"`` rule plans one joint step per iteration: a
Newton step on the profile when its exact Hessian is negative definite, the
step in the metric above otherwise. That joint step is tried first, and the
block sweep only runs when it cannot raise the profile. Block moves alone
crawl along ridges where the parameters are strongly coupled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cml import default_init
from .el import EstimatingFunctionMatrix, LagrangeState, solve_lambda
from .errors import DimensionError, InputError
from .model_core import (
    ArModelParams,
    RegressionDataset,
    backshift,
    lag_matrix,
    warn_if_nonstationary,
)

logger = logging.getLogger(__name__)

BLOCKS = ("phi", "beta", "sigma2")
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 200
    bound: float = 1.0
    init: str = "zero"
    damping: float = 0.5

    def __post_init__(self):
        if self.init not in ("zero", "minus-n"):
            raise InputError("solver init must be 'zero' or 'minus-n'")


@dataclass(frozen=True)
class CelOptions:
    tol: float = 1e-6
    max_iter: int = 300
    block_order: tuple[str, ...] = BLOCKS
    freeze_lags: bool = False
    max_halvings: int = 30
    damping: float = 0.5
    step_rule: str = "gauss-newton"
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if sorted(self.block_order) != sorted(BLOCKS):
            raise InputError(f"block_order must be a permutation of {BLOCKS}")
        if self.step_rule not in ("gauss-newton", "block-newton"):
            raise InputError("step_rule must be 'gauss-newton' or 'block-newton'")


@dataclass(frozen=True)
class CelFitResult:
    params: ArModelParams
    lagrange: LagrangeState
    profile_logel: float
    outer_iterations: int
    converged: bool
    trace: tuple[dict, ...] = field(default=(), repr=False)

    @property
    def constraint_residuals(self) -> np.ndarray:
        return self.lagrange.constraint_residuals


@dataclass(frozen=True)
class _Pieces:
    r: np.ndarray  # filtered residuals, (n,)
    fX: np.ndarray  # filtered design, (n, M)
    e_cur: np.ndarray  # lags of current residuals, (n, p)
    z: np.ndarray  # lag instrument used in the phi block, (n, p)
    X_lag: np.ndarray  # X_lag[t, i, j] = x_{t-j-1, i}, (n, M, p)
    z_depends_on_beta: bool


def _pieces(data: RegressionDataset, params: ArModelParams, frozen_lags=None) -> _Pieces:
    p = params.p
    M = data.n_predictors
    if p < 1:
        raise InputError("conditional EL needs p >= 1")
    if params.beta.shape != (M,):
        raise DimensionError(f"beta has {params.beta.shape[0]} entries, design has {M} columns")
    if p >= data.n_obs:
        raise InputError(f"p={p} leaves no observations")
    e = data.y - data.X @ params.beta
    fy = backshift(data.y, params.phi)
    fX = backshift(data.X, params.phi)
    e_cur = lag_matrix(e, p)
    X_lag = lag_matrix(data.X, p).transpose(0, 2, 1)
    if frozen_lags is None:
        z, dep = e_cur, True
    else:
        z = np.asarray(frozen_lags, dtype=float)
        if z.shape != e_cur.shape:
            raise DimensionError("frozen lag matrix has the wrong shape")
        dep = False
    return _Pieces(fy - fX @ params.beta, fX, e_cur, z, X_lag, dep)


def _rows(pc: _Pieces, sigma2: float) -> np.ndarray:
    r = pc.r
    return np.column_stack([r[:, None] * pc.fX, r[:, None] * pc.z, r * r - sigma2])


def build_psi(
    data: RegressionDataset, params: ArModelParams, frozen_lags=None
) -> EstimatingFunctionMatrix:
    return EstimatingFunctionMatrix(_rows(_pieces(data, params, frozen_lags), params.sigma2))


def _grad_r(pc: _Pieces) -> np.ndarray:
    n = pc.r.shape[0]
    return np.column_stack([-pc.fX, -pc.e_cur, np.zeros(n)])


def psi_jacobian(data: RegressionDataset, params: ArModelParams, frozen_lags=None) -> np.ndarray:
    """Per-row derivative of the estimating functions, shape (n, q, k) with
    parameters stacked as (beta, phi, sigma2)."""
    pc = _pieces(data, params, frozen_lags)
    n, M = pc.fX.shape
    p = pc.z.shape[1]
    k = M + p + 1
    gr = _grad_r(pc)
    r = pc.r
    J = np.zeros((n, k, k))
    J[:, :M, :] = pc.fX[:, :, None] * gr[:, None, :]
    J[:, :M, M : M + p] -= r[:, None, None] * pc.X_lag
    J[:, M : M + p, :] = pc.z[:, :, None] * gr[:, None, :]
    if pc.z_depends_on_beta:
        J[:, M : M + p, :M] -= r[:, None, None] * pc.X_lag.transpose(0, 2, 1)
    J[:, -1, :] = 2.0 * r[:, None] * gr
    J[:, -1, -1] -= 1.0
    return J


def fixed_lambda_derivatives(
    data: RegressionDataset, params: ArModelParams, lam, frozen_lags=None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian in (beta, phi, sigma2) of
    ``-sum log(n + lam' G_t(theta))`` with the multipliers held fixed."""
    pc = _pieces(data, params, frozen_lags)
    n, M = pc.fX.shape
    p = pc.z.shape[1]
    k = M + p + 1
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (k,):
        raise DimensionError(f"lambda must have {k} entries")
    l1, l2, l3 = lam[:M], lam[M : M + p], lam[-1]
    r = pc.r
    G = _rows(pc, params.sigma2)
    D = n + G @ lam
    if np.any(D <= 0):
        return -math.inf, np.full(k, np.nan), np.full((k, k), np.nan)
    pi = 1.0 / D

    gr = _grad_r(pc)
    gu = np.zeros((n, k))
    if pc.z_depends_on_beta:
        gu[:, :M] = -pc.X_lag @ l2
    gu[:, M : M + p] = -np.einsum("tij,i->tj", pc.X_lag, l1)
    u = pc.fX @ l1 + pc.z @ l2
    c = u + 2.0 * l3 * r
    gs = c[:, None] * gr + r[:, None] * gu
    gs[:, -1] -= l3

    # sum_t pi_t * Hess(s_t)
    w = pi
    H_s = np.einsum("t,ti,tj->ij", w, gr, gu)
    H_s = H_s + H_s.T + 2.0 * l3 * np.einsum("t,ti,tj->ij", w, gr, gr)
    cross = np.einsum("t,tij->ij", w * c, pc.X_lag)  # d2 r / d beta d phi
    H_s[:M, M : M + p] += cross
    H_s[M : M + p, :M] += cross.T

    value = -float(np.sum(np.log(D)))
    grad = -(pi @ gs)
    hess = np.einsum("t,ti,tj->ij", pi * pi, gs, gs) - H_s
    return value, grad, hess


def profile_logel(
    data: RegressionDataset,
    params: ArModelParams,
    solver_opts: SolverOptions | None = None,
    lambda_init=None,
    frozen_lags=None,
) -> tuple[float, LagrangeState]:
    """Profile log-EL at ``params``; ``-inf`` when the multipliers have no
    feasible solution."""
    so = solver_opts or SolverOptions()
    G = build_psi(data, params, frozen_lags).G
    state = solve_lambda(
        G,
        lambda_init,
        so.tol,
        so.max_iter,
        bound=so.bound,
        init=so.init,
        damping=so.damping,
    )
    if not state.feasible:
        return -math.inf, state
    return state.inner_objective, state


def _block_slices(M: int, p: int) -> dict[str, slice]:
    return {"beta": slice(0, M), "phi": slice(M, M + p), "sigma2": slice(M + p, M + p + 1)}


def _metric(data, params, state, frozen):
    """``n Jbar' S^-1 Jbar``: the curvature of the local quadratic model of the
    profile, with ``Jbar`` the weighted mean row Jacobian and ``S`` the
    weighted second moment of the rows."""
    G = build_psi(data, params, frozen).G
    J = psi_jacobian(data, params, frozen)
    pi = state.pi
    Jbar = np.einsum("t,tqk->qk", pi, J)
    S = (G * pi[:, None]).T @ G
    return G.shape[0] * Jbar.T @ np.linalg.solve(S, Jbar)


def profile_derivatives(
    data: RegressionDataset, params: ArModelParams, state: LagrangeState, frozen_lags=None
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of the profile log-EL at ``params``.

    ``state`` must hold the optimal multipliers there. The Hessian is
    ``F_tt - F_tl K^-1 F_lt`` with ``K`` the inner Hessian in lambda.
    """
    lam = state.lam
    _, grad, hess = fixed_lambda_derivatives(data, params, lam, frozen_lags)
    G = build_psi(data, params, frozen_lags).G
    J = psi_jacobian(data, params, frozen_lags)
    pi = 1.0 / (G.shape[0] + G @ lam)
    lamJ = np.einsum("q,tqk->tk", lam, J)
    cross = -np.einsum("t,tqk->qk", pi, J) + np.einsum("t,tq,tk->qk", pi * pi, G, lamJ)
    K = (G * (pi * pi)[:, None]).T @ G
    return grad, hess - cross.T @ np.linalg.solve(K, cross)


def _joint_step(data, params, lam, state, frozen):
    """Ascent step for all parameters at once, or None: Newton on the profile
    where its Hessian is negative definite, Gauss-Newton otherwise."""
    try:
        grad, H = profile_derivatives(data, params, state, frozen)
        if not np.all(np.isfinite(grad)):
            return None
        if np.all(np.isfinite(H)) and np.max(np.linalg.eigvalsh(H)) < 0:
            return -np.linalg.solve(H, grad)
        return np.linalg.solve(_metric(data, params, state, frozen), grad)
    except np.linalg.LinAlgError:
        return None


def _ascent_direction(data, params, lam, state, frozen, sl, rule="block-newton", planned=None):
    _, grad, hess = fixed_lambda_derivatives(data, params, lam, frozen)
    g = grad[sl]
    H = hess[sl, sl]
    if not np.all(np.isfinite(g)) or not np.any(g):
        return np.zeros_like(g), "none"
    if rule == "block-newton" and np.all(np.isfinite(H)) and np.max(np.linalg.eigvalsh(H)) < 0:
        return -np.linalg.solve(H, g), "newton"
    # the block's share of the step planned at the start of the iteration,
    # while it is still uphill for this block
    if planned is not None and g @ planned[sl] > 0:
        return planned[sl], "gradient"
    try:
        A = _metric(data, params, state, frozen)
        d = np.linalg.solve(A, grad)[sl]
        if g @ d > 0:
            return d, "gradient"
        return np.linalg.solve(A[sl, sl], g), "gradient"
    except np.linalg.LinAlgError:
        return g, "gradient"


def _try_step(data, params, value, state, direction, sl, step, opts, frozen):
    """Halve ``step`` until sigma2 stays positive, the multipliers stay feasible
    and the profile does not decrease; None when every trial fails."""
    M = data.n_predictors
    for _ in range(opts.max_halvings):
        theta = params.stacked()
        theta[sl] = theta[sl] + step * direction
        if theta[-1] > SIGMA2_FLOOR:
            cand = ArModelParams.from_stacked(theta, M)
            v, st = profile_logel(data, cand, opts.solver, state.lam, frozen)
            if st.feasible and v >= value:
                return cand, v, st
        step *= 0.5
    return None


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.max(np.abs(new - old) / np.maximum(1.0, np.abs(old))))


def cel_fit(
    data: RegressionDataset,
    p: int,
    init: ArModelParams | None = None,
    opts: CelOptions | None = None,
) -> CelFitResult:
    """Alternate multiplier solves and block parameter updates.

    Stops when the largest change of a stacked parameter, relative to
    ``max(1, |value|)``, is below ``opts.tol``. Under the default
    ``gauss-newton`` rule each iteration first tries a joint move of all
    parameters and sweeps the blocks only when that move fails. A Newton move starts at
    ``opts.damping`` times the step and a gradient move at the full step;
    both are halved until sigma2 stays positive, the multipliers stay
    feasible and the profile log-EL does not decrease.
    """
    opts = opts or CelOptions()
    data.check_order(p)
    if init is None:
        init = default_init(data, p)
    M = data.n_predictors
    if init.beta.shape != (M,) or init.phi.shape != (p,):
        raise DimensionError("initial values do not match (M, p)")
    frozen = None
    if opts.freeze_lags:
        frozen = lag_matrix(data.y - data.X @ init.beta, p)
    slices = _block_slices(M, p)
    so = opts.solver

    params = init
    value, state = profile_logel(data, params, so, None, frozen)
    if not state.feasible:
        raise InputError("initial values are infeasible for the empirical likelihood")
    trace: list[dict] = []
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        # Step 1: multipliers at the current parameters (warm start)
        value, state = profile_logel(data, params, so, state.lam, frozen)
        lam_m = state.lam
        start = params.stacked()
        planned = _joint_step(data, params, lam_m, state, frozen)
        moves = {}
        if opts.step_rule == "gauss-newton" and planned is not None:
            cand_state = _try_step(data, params, value, state, planned, slice(None), 1.0, opts, frozen)
            if cand_state is not None:
                params, value, state = cand_state
                moves["joint"] = "accepted"
        # Step 2: parameter blocks at the fixed multipliers
        for name in opts.block_order if "joint" not in moves else ():
            sl = slices[name]
            direction, kind = _ascent_direction(
                data, params, lam_m, state, frozen, sl, opts.step_rule, planned
            )
            moves[name] = kind
            if kind == "none":
                continue
            step = opts.damping if kind == "newton" else 1.0
            accepted = _try_step(data, params, value, state, direction, sl, step, opts, frozen)
            if accepted is None:
                moves[name] = kind + "-rejected"
            else:
                params, value, state = accepted
        change = _relative_change(params.stacked(), start)
        trace.append(
            {
                "iteration": it,
                "beta": params.beta.tolist(),
                "phi": params.phi.tolist(),
                "sigma2": params.sigma2,
                "profile_logel": value,
                "lambda_norm": float(np.max(np.abs(state.lam))),
                "change": change,
                "moves": moves,
            }
        )
        if change < opts.tol:
            converged = True
            break

    value, state = profile_logel(data, params, so, state.lam, frozen)
    converged = converged and state.feasible
    if not converged:
        logger.info("CEL iteration stopped after %d outer iterations without converging", it)
    warn_if_nonstationary(params.phi, "CEL estimate")
    return CelFitResult(params, state, value, it, converged, tuple(trace))
