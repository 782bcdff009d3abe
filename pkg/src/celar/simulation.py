"""Synthetic data generation and the Monte Carlo comparison of CML and CEL."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .cel import CelOptions, cel_fit
from .cml import cml_fit, default_init
from .errors import CelarError, ConfigError, NonStationaryWarning, StudyError
from .model_core import ArModelParams, RegressionDataset, is_stationary

logger = logging.getLogger(__name__)

METHODS = ("cml", "cel")
METHOD_LABELS = {"cml": "Normal", "cel": "Empirical"}


@dataclass(frozen=True)
class ErrorModel:
    """Innovation law: ``normal`` with the true sigma2, or the two-component
    mixture ``weight*N(0,1) + (1-weight)*N(contam_mean, contam_var)``."""

    kind: str = "normal"
    weight: float = 0.9
    contam_mean: float = 0.0
    contam_var: float = 1.0

    def __post_init__(self):
        if self.kind not in ("normal", "mixture"):
            raise ConfigError(f"error_model.kind: expected 'normal' or 'mixture', got {self.kind!r}")
        if self.kind == "mixture":
            if not 0.0 < self.weight < 1.0:
                raise ConfigError(f"error_model.weight: must lie in (0, 1), got {self.weight}")
            if not self.contam_var > 0:
                raise ConfigError(f"error_model.contam_var: must be positive, got {self.contam_var}")

    def draw(self, rng: np.random.Generator, size: int, sigma2: float) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(0.0, math.sqrt(sigma2), size)
        clean = rng.random(size) < self.weight
        z = rng.standard_normal(size)
        return np.where(clean, z, self.contam_mean + math.sqrt(self.contam_var) * z)

    def as_dict(self) -> dict:
        if self.kind == "normal":
            return {"kind": "normal"}
        return {
            "kind": "mixture",
            "weight": self.weight,
            "contam_mean": self.contam_mean,
            "contam_var": self.contam_var,
        }


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    reps: int
    true_params: ArModelParams
    error_model: ErrorModel = field(default_factory=ErrorModel)
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    fixed_design: bool = False
    burn_in: int = 100
    workers: int = 1
    cml_tol: float = 1e-8
    cml_max_iter: int = 500
    cel: CelOptions = field(default_factory=CelOptions)

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError(f"reps: must be at least 1, got {self.reps}")
        if self.n < self.true_params.beta.shape[0] + self.true_params.p + 2:
            raise ConfigError(f"n: {self.n} is too small for the model dimensions")
        if self.true_params.p < 1:
            raise ConfigError("true_params.phi: at least one AR coefficient is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods: expected a non-empty subset of {METHODS}, got {list(self.methods)}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be a 64-bit unsigned integer")
        if self.burn_in < 0 or self.workers < 1:
            raise ConfigError("burn_in must be >= 0 and workers >= 1")


@dataclass(frozen=True)
class MethodSummary:
    names: tuple[str, ...]
    mean: np.ndarray
    mse: np.ndarray
    bias: np.ndarray
    n_used: int
    failures: int

    def as_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": self.mean.tolist(),
            "mse": self.mse.tolist(),
            "bias": self.bias.tolist(),
            "n_used": self.n_used,
            "failures": self.failures,
        }


@dataclass(frozen=True)
class SimulationReport:
    n: int
    reps: int
    truth: np.ndarray
    methods: dict[str, MethodSummary]
    estimates: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "reps": self.reps,
            "truth": self.truth.tolist(),
            "methods": {m: s.as_dict() for m, s in self.methods.items()},
        }


def _rng(seed: int, stream: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, rep)))


def generate_dataset(config: SimulationConfig, rep: int = 0) -> RegressionDataset:
    """One replication: iid N(0,1) predictors and AR errors driven by the
    configured innovations, started from zeros with a discarded burn-in."""
    tp = config.true_params
    if not is_stationary(tp.phi):
        raise ConfigError(f"true_params.phi: {tp.phi.tolist()} is not stationary")
    n, M, p = config.n, tp.beta.shape[0], tp.p
    rng = _rng(config.seed, 0, rep)
    design_rng = _rng(config.seed, 1, 0) if config.fixed_design else rng
    X = design_rng.standard_normal((n, M))
    total = n + config.burn_in
    a = config.error_model.draw(rng, total, tp.sigma2)
    # e_t = phi_1 e_{t-1} + ... + phi_p e_{t-p} + a_t from zero initial state
    e = signal.lfilter([1.0], np.concatenate([[1.0], -tp.phi]), a)[config.burn_in :]
    return RegressionDataset(X @ tp.beta + e, X)


def mse_bias(estimates, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column means, mean squared deviations and biases of a reps x k matrix."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=float)
    if est.shape[0] < 1:
        raise StudyError("no estimates to summarise")
    mean = est.mean(axis=0)
    mse = ((est - truth) ** 2).mean(axis=0)
    return mean, mse, mean - truth


def _fit_one(config: SimulationConfig, rep: int) -> dict[str, np.ndarray | None]:
    data = generate_dataset(config, rep)
    p = config.true_params.p
    out: dict[str, np.ndarray | None] = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonStationaryWarning)
        try:
            init = default_init(data, p)
        except CelarError as exc:
            logger.info("replication %d: no LS start (%s)", rep, exc)
            return {m: None for m in config.methods}
        for m in config.methods:
            try:
                if m == "cml":
                    res = cml_fit(data, p, init, config.cml_tol, config.cml_max_iter)
                else:
                    res = cel_fit(data, p, init, config.cel)
            except CelarError as exc:
                logger.info("replication %d: %s failed (%s)", rep, m, exc)
                out[m] = None
                continue
            out[m] = res.params.stacked() if res.converged else None
    return out


def _fit_rep(args):
    return _fit_one(*args)


def run_study(config: SimulationConfig) -> SimulationReport:
    """Fit every replication with each method from LS starting values.

    Non-converged fits are dropped from the summaries and counted as
    failures. Results do not depend on ``workers``.
    """
    jobs = [(config, rep) for rep in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_fit_rep, jobs, chunksize=max(1, config.reps // (4 * config.workers))))
    else:
        results = [_fit_rep(j) for j in jobs]

    tp = config.true_params
    truth = tp.stacked()
    names = tuple(f"beta{i + 1}" for i in range(tp.beta.shape[0])) + tuple(
        f"phi{j + 1}" for j in range(tp.p)
    ) + ("sigma2",)
    summaries, estimates = {}, {}
    for m in config.methods:
        ok = [r[m] for r in results if r[m] is not None]
        failures = config.reps - len(ok)
        if not ok:
            raise StudyError(f"every replication failed for method {m!r}")
        est = np.vstack(ok)
        mean, mse, bias = mse_bias(est, truth)
        summaries[m] = MethodSummary(names, mean, mse, bias, len(ok), failures)
        estimates[m] = est
    return SimulationReport(config.n, config.reps, truth, summaries, estimates)


def write_table_csv(reports: list[SimulationReport], path) -> None:
    """One row per (parameter, statistic); one column per (n, method)."""
    if not reports:
        raise StudyError("no reports to tabulate")
    header = ["parameter", "statistic"]
    cols = []
    for rep in reports:
        for m, summ in rep.methods.items():
            header.append(f"n={rep.n} {METHOD_LABELS[m]}")
            cols.append(summ)
    names = cols[0].names
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, name in enumerate(names):
            for stat, attr in (("estimate", "mean"), ("MSE", "mse"), ("BIAS", "bias")):
                w.writerow([name, stat] + [f"{getattr(s, attr)[k]:.6g}" for s in cols])
        w.writerow(["failures", "count"] + [s.failures for s in cols])
