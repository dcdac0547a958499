import warnings

import numpy as np
import pytest
import scipy.signal

from fsmcmc.diagnostics import (DiagnosticsWarning, acf, ar1_reference_acf, ess, iact, psrf,
                                relative_error_curve, summarize)


def ar1(rho, n, rng):
    e = rng.standard_normal(n) * np.sqrt(1 - rho ** 2)
    e[0] = rng.standard_normal()
    return scipy.signal.lfilter([1.0], [1.0, -rho], e)


class TestACF:
    def test_fft_matches_direct(self):
        x = np.random.default_rng(0).standard_normal(777)
        np.testing.assert_allclose(acf(x, 100), acf(x, 100, method="direct"), atol=1e-10)

    def test_lag_zero_is_one(self):
        assert acf(np.random.default_rng(1).standard_normal(50))[0] == pytest.approx(1.0)

    def test_alternating(self):
        x = np.tile([1.0, -1.0], 50)
        r = acf(x, 2)
        assert r[1] == pytest.approx(-0.99) and r[2] == pytest.approx(0.98)

    def test_constant_trace_warns(self):
        with pytest.warns(DiagnosticsWarning):
            assert np.isnan(acf(np.ones(10))).all()

    @pytest.mark.parametrize("x", [[1.0], [1.0, np.nan, 2.0], np.ones((3, 3))])
    def test_invalid(self, x):
        with pytest.raises(ValueError):
            acf(x)

    def test_ar1_decay(self):
        x = ar1(0.8, 200_000, np.random.default_rng(2))
        np.testing.assert_allclose(acf(x, 5), 0.8 ** np.arange(6), atol=0.02)


class TestIACT:
    def test_white_noise(self):
        rho = np.zeros(50)
        rho[0] = 1.0
        assert iact(rho) == 0.0

    def test_exact_geometric(self):
        # sum_{n>=1} r^n = r / (1 - r)
        r = 0.9
        assert iact(r ** np.arange(2000)) == pytest.approx(r / (1 - r), rel=1e-8)

    def test_floor(self):
        rho = np.array([1.0, -0.9, 0.8, -0.9, 0.0, 0.0])
        assert iact(rho) >= -0.5

    def test_undecayed_warns(self):
        with pytest.warns(DiagnosticsWarning):
            iact(0.999 ** np.arange(20))

    def test_ar1_estimate(self):
        x = ar1(0.7, 200_000, np.random.default_rng(3))
        assert iact(acf(x, 500)) == pytest.approx(0.7 / 0.3, rel=0.1)


class TestESS:
    def test_formula(self):
        assert ess(1000, 0.0) == 1000
        assert ess(1000, 4.5) == 100

    def test_negative_theta(self):
        with pytest.raises(ValueError):
            ess(10, -0.1)


class TestPSRF:
    def test_iid_chains_near_one(self):
        x = np.random.default_rng(4).standard_normal((4, 5000))
        r = psrf(x)
        assert r >= 1 - 1 / 5000  # sampling noise can dip below 1 by O(1/n)
        assert r < 1.01

    def test_separated_chains_large(self):
        x = np.random.default_rng(5).standard_normal((4, 1000)) + np.arange(4)[:, None] * 3
        assert psrf(x) > 2

    def test_matches_manual(self):
        x = np.random.default_rng(6).standard_normal((3, 20))
        m, n = 3, 20
        W = np.mean([np.var(c, ddof=1) for c in x])
        B = n * np.var(x.mean(axis=1), ddof=1)
        V = (n - 1) / n * W + (m + 1) / m * B / n
        assert psrf(x, corrected=False) == pytest.approx(np.sqrt(V / W), rel=1e-14)

    def test_correction_oracle(self):
        # degrees-of-freedom correction written out term by term
        x = np.random.default_rng(10).standard_normal((4, 50)) + np.array([[0.0], [0.1], [0.0], [-0.2]])
        m, n = x.shape
        xb = [sum(c) / n for c in x]
        s2 = [sum((v - mu) ** 2 for v in c) / (n - 1) for c, mu in zip(x, xb)]
        grand = sum(xb) / m
        W = sum(s2) / m
        B = n * sum((mu - grand) ** 2 for mu in xb) / (m - 1)
        V = (n - 1) / n * W + (m + 1) / (m * n) * B
        s2m = sum(s2) / m
        xb2 = [mu ** 2 for mu in xb]
        xb2m = sum(xb2) / m
        var_s2 = sum((v - s2m) ** 2 for v in s2) / (m - 1)
        cov_s2_xb2 = sum((a - s2m) * (b - xb2m) for a, b in zip(s2, xb2)) / (m - 1)
        cov_s2_xb = sum((a - s2m) * (b - grand) for a, b in zip(s2, xb)) / (m - 1)
        var_V = (((n - 1) / n) ** 2 / m * var_s2 + ((m + 1) / (m * n)) ** 2 * 2 / (m - 1) * B ** 2
                 + 2 * (m + 1) * (n - 1) / (m * n * n) * n / m * (cov_s2_xb2 - 2 * grand * cov_s2_xb))
        d = 2 * V ** 2 / var_V
        assert psrf(x) == pytest.approx(np.sqrt((d + 3) / (d + 1) * V / W), rel=1e-12)

    def test_affine_invariance(self):
        x = np.random.default_rng(9).standard_normal((4, 100))
        assert psrf(3.0 * x - 7.0) == pytest.approx(psrf(x), rel=1e-12)
        assert psrf(3.0 * x - 7.0, corrected=False) == pytest.approx(psrf(x, corrected=False), rel=1e-12)

    def test_needs_two_chains(self):
        with pytest.raises(ValueError):
            psrf(np.zeros((1, 10)))


def test_summary_standard_error():
    x = ar1(0.5, 100_000, np.random.default_rng(7))
    s = summarize(x, "a", max_lag=200)
    assert s.ess == pytest.approx(len(x) / 3, rel=0.1)
    assert s.stderr == pytest.approx(np.sqrt(s.var / s.ess))


def test_relative_error_curve():
    x = np.array([[1.0, 0.0], [3.0, 0.0], [2.0, 0.0]])
    counts, err = relative_error_curve(x, np.array([2.0, 0.0]))
    np.testing.assert_allclose(err, [0.5, 0.0, 0.0])
    counts, err = relative_error_curve(x, np.array([1.0, 1.0]), "var", points=np.array([3]))
    # column variances are (1, 0)
    assert err[0] == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(ValueError):
        relative_error_curve(x, np.zeros(2))


def test_ar1_reference():
    np.testing.assert_allclose(ar1_reference_acf(0.2, 2), np.exp(-0.02 * np.arange(3)))


def test_no_warning_for_healthy_trace():
    x = ar1(0.3, 10_000, np.random.default_rng(8))
    with warnings.catch_warnings():
        warnings.simplefilter("error", DiagnosticsWarning)
        summarize(x)
