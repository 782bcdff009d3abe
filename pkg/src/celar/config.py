"""Reading simulation configurations from TOML or JSON files."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import tomli

from .cel import CelOptions, SolverOptions
from .errors import ConfigError, InputError
from .model_core import ArModelParams
from .simulation import ErrorModel, SimulationConfig

_TOP = {
    "n", "reps", "seed", "methods", "fixed_design", "burn_in", "workers",
    "true_params", "error_model", "cml", "cel",
}
_CEL = {"tol", "max_iter", "step_rule", "freeze_lags", "block_order", "damping", "max_halvings", "solver"}
_SOLVER = {"tol", "max_iter", "bound", "init", "damping"}


def read_mapping(path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            return tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _check_keys(d: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")


def _get(d: dict, key: str, kind, where: str, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{where}{key}: required field is missing")
        return default
    v = d[key]
    ok = isinstance(v, kind) and not (kind is not bool and isinstance(v, bool) and bool not in (kind if isinstance(kind, tuple) else (kind,)))
    if not ok:
        raise ConfigError(f"{where}{key}: expected {getattr(kind, '__name__', kind)}, got {v!r}")
    return v


def _floats(d, key, where, required=True):
    v = _get(d, key, list, where, required=required)
    if v is None:
        return None
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{where}{key}: expected a list of numbers")
    return [float(x) for x in v]


def configs_from_mapping(doc: dict) -> list[SimulationConfig]:
    """One config per requested sample size."""
    _check_keys(doc, _TOP, "config")
    ns = doc.get("n")
    if isinstance(ns, int) and not isinstance(ns, bool):
        ns = [ns]
    if not (isinstance(ns, list) and ns and all(isinstance(x, int) and not isinstance(x, bool) for x in ns)):
        raise ConfigError(f"n: expected an integer or a list of integers, got {ns!r}")

    tp = _get(doc, "true_params", dict, "", required=True)
    _check_keys(tp, {"beta", "phi", "sigma2"}, "true_params")
    s2 = _get(tp, "sigma2", (int, float), "true_params.", 1.0)
    try:
        true_params = ArModelParams(
            _floats(tp, "beta", "true_params."), _floats(tp, "phi", "true_params."), s2
        )
    except InputError as exc:
        raise ConfigError(f"true_params: {exc}") from exc

    em = _get(doc, "error_model", dict, "", {"kind": "normal"})
    _check_keys(em, {"kind", "weight", "contam_mean", "contam_var"}, "error_model")
    error_model = ErrorModel(
        kind=_get(em, "kind", str, "error_model.", "normal"),
        weight=float(_get(em, "weight", (int, float), "error_model.", 0.9)),
        contam_mean=float(_get(em, "contam_mean", (int, float), "error_model.", 0.0)),
        contam_var=float(_get(em, "contam_var", (int, float), "error_model.", 1.0)),
    )

    cel_doc = _get(doc, "cel", dict, "", {})
    _check_keys(cel_doc, _CEL, "cel")
    solver_doc = _get(cel_doc, "solver", dict, "cel.", {})
    _check_keys(solver_doc, _SOLVER, "cel.solver")
    cel_kw = {k: v for k, v in cel_doc.items() if k != "solver"}
    if "block_order" in cel_kw:
        cel_kw["block_order"] = tuple(cel_kw["block_order"])
    try:
        cel = CelOptions(**cel_kw, solver=SolverOptions(**solver_doc))
    except InputError as exc:
        raise ConfigError(f"cel: {exc}") from exc

    cml_doc = _get(doc, "cml", dict, "", {})
    _check_keys(cml_doc, {"tol", "max_iter"}, "cml")
    methods = doc.get("methods", ["cml", "cel"])
    if not isinstance(methods, list):
        raise ConfigError("methods: expected a list")

    return [
        SimulationConfig(
            n=n,
            reps=_get(doc, "reps", int, "", required=True),
            true_params=true_params,
            error_model=error_model,
            seed=_get(doc, "seed", int, "", 0),
            methods=tuple(methods),
            fixed_design=_get(doc, "fixed_design", bool, "", False),
            burn_in=_get(doc, "burn_in", int, "", 100),
            workers=_get(doc, "workers", int, "", 1),
            cml_tol=float(_get(cml_doc, "tol", (int, float), "cml.", 1e-8)),
            cml_max_iter=_get(cml_doc, "max_iter", int, "cml.", 500),
            cel=cel,
        )
        for n in ns
    ]


def load_configs(path) -> list[SimulationConfig]:
    return configs_from_mapping(read_mapping(path))


def config_summary(cfg: SimulationConfig) -> dict:
    return {
        "n": cfg.n,
        "reps": cfg.reps,
        "seed": cfg.seed,
        "methods": list(cfg.methods),
        "fixed_design": cfg.fixed_design,
        "burn_in": cfg.burn_in,
        "true_params": cfg.true_params.as_dict(),
        "error_model": cfg.error_model.as_dict(),
    }
