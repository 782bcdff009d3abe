import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from celar.diagnostics import acf, diagnose, durbin_watson, pacf, qq_pairs
from celar.errors import InputError, UndefinedStatisticError
from celar.model_core import RegressionDataset


class TestDurbinWatson:
    def test_constant(self):
        assert durbin_watson(np.full(6, 2.5)) == 0.0

    def test_alternating(self):
        assert durbin_watson([1.0, -1.0, 1.0, -1.0]) == pytest.approx(3.0)

    def test_softdrink(self, softdrink):
        report, _ = diagnose(softdrink)
        assert round(report.dw, 2) == 1.08

    def test_zero_residuals(self):
        with pytest.raises(UndefinedStatisticError):
            durbin_watson(np.zeros(5))

    def test_too_short(self):
        with pytest.raises(InputError):
            durbin_watson([1.0])

    @settings(max_examples=50, deadline=None)
    @given(
        hnp.arrays(float, st.integers(2, 40), elements=st.floats(-100, 100)),
        st.floats(0.01, 100).flatmap(lambda c: st.sampled_from([c, -c])),
    )
    def test_scale_invariance_and_range(self, e, c):
        if np.dot(e, e) < 1e-12:
            return
        d = durbin_watson(e)
        assert 0.0 <= d <= 4.0 + 1e-12
        assert durbin_watson(c * e) == pytest.approx(d, rel=1e-9)

    def test_white_noise(self):
        for seed in range(3):
            e = np.random.default_rng(seed).standard_normal(2000)
            assert abs(durbin_watson(e) - 2.0) < 0.2

    def test_decision(self, softdrink):
        report, _ = diagnose(softdrink, dl=1.20, du=1.41)
        assert report.dw_decision == "positive autocorrelation"
        assert report.as_dict()["dw_decision"] == "positive autocorrelation"


class TestAcfPacf:
    def test_white_noise(self):
        x = np.random.default_rng(9).standard_normal(500)
        assert np.all(np.abs(acf(x, 5)) < 3 / np.sqrt(500))

    def test_lag_one_matches_direct_formula(self):
        x = 0.9 ** np.arange(3000) * 10.0
        xc = x - x.mean()
        want = float(xc[1:] @ xc[:-1] / (xc @ xc))
        assert acf(x, 1)[0] == pytest.approx(want, rel=1e-12)

    def test_ar1_simulated(self):
        r = np.random.default_rng(4)
        a = r.standard_normal(20000)
        e = np.zeros_like(a)
        for t in range(1, a.size):
            e[t] = 0.7 * e[t - 1] + a[t]
        assert acf(e, 1)[0] == pytest.approx(0.7, abs=0.02)
        n = e.size
        assert np.all(np.abs(pacf(e, 5)[1:]) < 3 / np.sqrt(n))

    def test_constant_undefined(self):
        with pytest.raises(UndefinedStatisticError):
            acf(np.ones(10), 2)
        with pytest.raises(UndefinedStatisticError):
            pacf(np.ones(10), 2)

    def test_lag_range(self):
        with pytest.raises(InputError):
            acf(np.arange(5.0), 5)

    @settings(max_examples=40, deadline=None)
    @given(hnp.arrays(float, st.integers(8, 60), elements=st.floats(-10, 10)))
    def test_bounds_and_first_lag(self, x):
        if np.ptp(x) < 1e-6:
            return
        k = min(5, x.size - 1)
        a = acf(x, k)
        assert np.all(np.abs(a) <= 1 + 1e-12)
        assert pacf(x, k)[0] == a[0]

    def test_yule_walker_oracle(self, rng):
        x = rng.standard_normal(300)
        rho = acf(x, 6)
        got = pacf(x, 6)
        full = np.concatenate([[1.0], rho])
        for k in range(1, 7):
            R = np.array([[full[abs(i - j)] for j in range(k)] for i in range(k)])
            coef = np.linalg.solve(R, full[1 : k + 1])
            assert got[k - 1] == pytest.approx(coef[-1], abs=1e-10)


class TestQQ:
    def test_sorted_and_standardised(self, rng):
        e = rng.standard_normal(50)
        theo, samp = qq_pairs(e)
        assert np.all(np.diff(theo) > 0) and np.all(np.diff(samp) >= 0)
        assert samp.mean() == pytest.approx(0.0, abs=1e-12)
        assert theo[0] == pytest.approx(-theo[-1])

    def test_constant_rejected(self):
        with pytest.raises(UndefinedStatisticError):
            qq_pairs(np.ones(5))


def test_diagnose_defaults(rng):
    X = np.column_stack([np.ones(30), rng.standard_normal(30)])
    d = RegressionDataset(X @ [1.0, 2.0] + rng.standard_normal(30), X)
    report, e = diagnose(d)
    assert report.n == 30 and report.acf.shape == (10,) and e.shape == (30,)
    assert report.dw_decision is None
    assert set(report.as_dict()) == {"dw", "acf", "pacf", "n"}
