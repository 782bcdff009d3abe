"""Command-line front end: ``celar fit | diagnose | simulate | generate``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cel import CelOptions, cel_fit
from .cml import cml_fit, default_init
from .config import config_summary, load_configs
from .diagnostics import diagnose, qq_pairs
from .errors import CelarError, InputError, NonStationaryWarning
from .model_core import RegressionDataset, load_csv, ls_fit, residual_series, write_csv
from .records import FitRecord, diagnostics_dict, validate
from .simulation import generate_dataset, run_study, write_table_csv

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
PERTURBATIONS = ("last-outlier", "scale-last-5")
OUTLIER_SDS = 10.0

logger = logging.getLogger("celar")


def perturb(data: RegressionDataset, recipe: str, sds: float = OUTLIER_SDS) -> RegressionDataset:
    """Contaminate the last response value.

    ``last-outlier`` shifts it up by ``sds`` standard deviations of the LS
    residuals; ``scale-last-5`` multiplies it by five.
    """
    y = data.y.copy()
    if recipe == "last-outlier":
        e = residual_series(data, ls_fit(data))
        y[-1] += sds * float(np.std(e, ddof=data.n_predictors))
    elif recipe == "scale-last-5":
        y[-1] *= 5.0
    else:
        raise InputError(f"unknown perturbation {recipe!r}")
    return data.with_response(y)


def fit_record(
    data: RegressionDataset,
    p: int,
    method: str,
    tol: float | None = None,
    max_iter: int | None = None,
    perturbation: str | None = None,
) -> FitRecord:
    """Fit ``data`` from least-squares starting values and package the result."""
    common = dict(
        names=data.names, n_obs=data.n_obs, intercept=data.intercept_included, perturb=perturbation
    )
    if method == "ls":
        beta = ls_fit(data)
        e = residual_series(data, beta)
        dof = data.n_obs - data.n_predictors
        s2 = float(e @ e) / dof if dof > 0 else 0.0
        return FitRecord("ls", tuple(beta.tolist()), (), max(s2, 0.0), p=0,
                         convergence={"converged": True, "iterations": 0}, **common)
    init = default_init(data, p)
    if method == "cml":
        kw = {}
        if tol is not None:
            kw["tol"] = tol
        if max_iter is not None:
            kw["max_iter"] = max_iter
        res = cml_fit(data, p, init, **kw)
        conv = {"converged": res.converged, "iterations": res.iterations, "loglik": res.conditional_loglik}
    elif method == "cel":
        opts = CelOptions(
            tol=tol if tol is not None else CelOptions.tol,
            max_iter=max_iter if max_iter is not None else CelOptions.max_iter,
        )
        res = cel_fit(data, p, init, opts)
        conv = {
            "converged": res.converged,
            "iterations": res.outer_iterations,
            "profile_logel": res.profile_logel,
            "constraint_residuals": res.constraint_residuals.tolist(),
            "weights_sum": float(res.lagrange.pi.sum()),
            "trace": [_jsonable(t) for t in res.trace],
        }
    else:
        raise InputError(f"unknown method {method!r}")
    prm = res.params
    return FitRecord(method, tuple(prm.beta.tolist()), tuple(prm.phi.tolist()), prm.sigma2,
                     p=p, convergence=conv, **common)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def _emit(doc: dict, out) -> None:
    out.write(json.dumps(doc, indent=2) + "\n")


def cmd_fit(args, out) -> int:
    data = load_csv(args.data, add_intercept=not args.no_intercept)
    if args.perturb:
        data = perturb(data, args.perturb, args.outlier_sds)
    rec = fit_record(data, args.p, args.method, args.tol, args.max_iter, args.perturb)
    out.write(rec.to_json(indent=2) + "\n")
    if not rec.converged:
        logger.error("%s fit did not converge", args.method)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_diagnose(args, out) -> int:
    data = load_csv(args.data, add_intercept=not args.no_intercept)
    if (args.dl is None) != (args.du is None):
        raise InputError("--dl and --du must be given together")
    report, e = diagnose(data, args.max_lag, args.dl, args.du)
    doc = diagnostics_dict(report)
    _emit(doc, out)
    if args.plot_data:
        theo, samp = qq_pairs(e)
        k = len(report.acf)
        with Path(args.plot_data).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "residual", "lag", "acf", "pacf", "qq_theoretical", "qq_sample"])
            for i in range(len(e)):
                lag_cols = [i + 1, repr(float(report.acf[i])), repr(float(report.pacf[i]))] if i < k else ["", "", ""]
                w.writerow([i + 1, repr(float(e[i]))] + lag_cols + [repr(float(theo[i])), repr(float(samp[i]))])
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    configs = load_configs(args.config)
    if args.workers is not None:
        configs = [replace(c, workers=args.workers) for c in configs]
    reports = [run_study(c) for c in configs]
    doc = {
        "config": config_summary(configs[0]) | {"n": [c.n for c in configs]},
        "reports": [r.as_dict() for r in reports],
    }
    doc = json.loads(json.dumps(doc))
    validate(doc, "simulation_report")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    write_table_csv(reports, out_dir / "table.csv")
    _emit({"report": str(out_dir / "report.json"), "table": str(out_dir / "table.csv")}, out)
    failed = sum(s.failures for r in reports for s in r.methods.values())
    if failed:
        logger.warning("%d fits failed or did not converge", failed)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_generate(args, out) -> int:
    cfg = load_configs(args.config)[0]
    data = generate_dataset(cfg, args.rep)
    try:
        write_csv(data, args.out)
    except OSError as exc:
        raise InputError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="celar", description="Regression with AR(p) errors by CML and CEL.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a dataset and print a JSON fit record")
    f.add_argument("--data", required=True)
    f.add_argument("--p", type=int, default=1)
    f.add_argument("--method", choices=("cml", "cel", "ls"), default="cel")
    f.add_argument("--tol", type=float)
    f.add_argument("--max-iter", type=int)
    f.add_argument("--perturb", choices=PERTURBATIONS)
    f.add_argument("--outlier-sds", type=float, default=OUTLIER_SDS,
                   help="shift used by --perturb last-outlier, in residual SDs")
    f.add_argument("--no-intercept", action="store_true")
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", help="LS residual diagnostics as JSON")
    d.add_argument("--data", required=True)
    d.add_argument("--max-lag", type=int)
    d.add_argument("--dl", type=float)
    d.add_argument("--du", type=float)
    d.add_argument("--plot-data", help="CSV of residuals, ACF/PACF and Q-Q pairs")
    d.add_argument("--no-intercept", action="store_true")
    d.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("simulate", help="run a Monte Carlo study from a TOML/JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("generate", help="write one synthetic dataset as CSV")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--rep", type=int, default=0)
    g.set_defaults(func=cmd_generate)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="celar: %(levelname)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", NonStationaryWarning)
            return args.func(args, out)
    except InputError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except CelarError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
