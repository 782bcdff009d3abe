"""Linear regression with AR(p) errors by conditional maximum likelihood
and conditional empirical likelihood."""

from .cel import (
    CelFitResult,
    CelOptions,
    SolverOptions,
    build_psi,
    cel_fit,
    profile_derivatives,
    profile_logel,
)
from .cml import CmlFitResult, build_autocov, cml_fit, default_init
from .diagnostics import DiagnosticsReport, acf, diagnose, durbin_watson, pacf, qq_pairs
from .el import LagrangeState, el_weights, iid_el_fit, inner_objective, solve_lambda
from .errors import (
    CelarError,
    ConfigError,
    InputError,
    NonStationaryWarning,
    NumericalError,
)
from .model_core import (
    ArModelParams,
    FilteredSample,
    RegressionDataset,
    apply_backshift,
    backshift,
    load_csv,
    ls_fit,
)
from .records import FitRecord
from .simulation import ErrorModel, SimulationConfig, SimulationReport, generate_dataset, run_study

__version__ = "0.1.0"

__all__ = [
    "ArModelParams", "CelFitResult", "CelOptions", "CelarError", "CmlFitResult", "ConfigError",
    "DiagnosticsReport", "ErrorModel", "FilteredSample", "FitRecord", "InputError",
    "LagrangeState", "NonStationaryWarning", "NumericalError", "RegressionDataset",
    "SimulationConfig", "SimulationReport", "SolverOptions", "acf", "apply_backshift",
    "backshift", "build_autocov", "build_psi", "cel_fit", "cml_fit", "default_init",
    "diagnose", "durbin_watson", "el_weights", "generate_dataset", "iid_el_fit",
    "inner_objective", "load_csv", "ls_fit", "pacf", "profile_derivatives", "profile_logel", "qq_pairs",
    "run_study", "solve_lambda",
]
