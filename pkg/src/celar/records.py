"""Machine-readable fit records and JSON schema validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema
from referencing import Registry, Resource

from .diagnostics import DiagnosticsReport

SCHEMAS = ("fit_record", "diagnostics", "simulation_report")


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    text = (resources.files("celar") / "schemas" / f"{name}.schema.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _validator(name: str):
    registry = Registry().with_resources(
        (f"{s}.schema.json", Resource.from_contents(_schema(s))) for s in SCHEMAS
    )
    return jsonschema.Draft202012Validator(_schema(name), registry=registry)


def validate(doc: Any, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` when ``doc`` does not match schema ``name``."""
    _validator(name).validate(doc)


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


@dataclass(frozen=True)
class FitRecord:
    method: str
    beta: tuple[float, ...]
    phi: tuple[float, ...]
    sigma2: float
    names: tuple[str, ...]
    n_obs: int
    p: int
    intercept: bool
    convergence: dict = field(default_factory=dict)
    perturb: str | None = None
    diagnostics: dict | None = None

    @property
    def converged(self) -> bool:
        return bool(self.convergence.get("converged", False))

    def to_dict(self) -> dict:
        return _clean(
            {
                "method": self.method,
                "estimates": {
                    "beta": list(self.beta),
                    "phi": list(self.phi),
                    "sigma2": self.sigma2,
                },
                "names": list(self.names),
                "n_obs": self.n_obs,
                "p": self.p,
                "intercept": self.intercept,
                "perturb": self.perturb,
                "convergence": dict(self.convergence),
                "diagnostics": self.diagnostics,
            }
        )

    def to_json(self, **kw) -> str:
        doc = self.to_dict()
        validate(doc, "fit_record")
        return json.dumps(doc, **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "FitRecord":
        validate(doc, "fit_record")
        est = doc["estimates"]
        return cls(
            method=doc["method"],
            beta=tuple(est["beta"]),
            phi=tuple(est["phi"]),
            sigma2=est["sigma2"],
            names=tuple(doc["names"]),
            n_obs=doc["n_obs"],
            p=doc["p"],
            intercept=doc["intercept"],
            convergence=dict(doc["convergence"]),
            perturb=doc.get("perturb"),
            diagnostics=doc.get("diagnostics"),
        )

    @classmethod
    def from_json(cls, text: str) -> "FitRecord":
        return cls.from_dict(json.loads(text))


def diagnostics_dict(report: DiagnosticsReport) -> dict:
    doc = _clean(report.as_dict())
    validate(doc, "diagnostics")
    return doc
