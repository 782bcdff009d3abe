import sys

import numpy as np
import pytest

from celar.datasets import load_softdrink
from celar.model_core import RegressionDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def softdrink():
    return load_softdrink()


def ar_dataset(n, beta, phi, sigma=1.0, seed=0, burn=100):
    """Regression with AR errors built by an explicit loop (independent of the library)."""
    r = np.random.default_rng(seed)
    beta = np.asarray(beta, float)
    X = r.standard_normal((n, beta.size))
    e = np.zeros(n + burn)
    a = sigma * r.standard_normal(n + burn)
    for t in range(n + burn):
        e[t] = a[t] + sum(phi[j] * e[t - 1 - j] for j in range(len(phi)) if t - 1 - j >= 0)
    return RegressionDataset(X @ beta + e[burn:], X)


@pytest.fixture
def ar1_data():
    return ar_dataset(60, [1.0, 2.0], [0.6], seed=3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line.splitlines()[0])
