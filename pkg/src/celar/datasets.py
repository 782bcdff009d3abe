"""Access to the bundled example datasets."""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

from .model_core import RegressionDataset, load_csv

CO2_ENV = "CELAR_CO2_CSV"


def dataset_path(name: str) -> Path:
    if name == "co2":
        override = os.environ.get(CO2_ENV)
        if override:
            return Path(override)
        name = "co2_energy"
    path = Path(str(resources.files("celar") / "data" / f"{name}.csv"))
    if not path.exists():
        raise FileNotFoundError(
            f"dataset {name!r} is not bundled; see celar/data/README.md"
            + (f" or set {CO2_ENV}" if name == "co2_energy" else "")
        )
    return path


def load_softdrink(add_intercept: bool = True) -> RegressionDataset:
    return load_csv(dataset_path("softdrink"), add_intercept)


def load_co2(add_intercept: bool = True) -> RegressionDataset:
    return load_csv(dataset_path("co2"), add_intercept)
