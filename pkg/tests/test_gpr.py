import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gptoolkit import gpr
from gptoolkit import kernels as kern
from gptoolkit.errors import DimensionMismatch, EmptyData, NonFinite

from conftest import TOY_K, TOY_X


def _dense_log_ml(k, y):
    # explicit inverse and determinant: independent of the Cholesky path
    n = y.size
    return -0.5 * y @ np.linalg.inv(k) @ y - 0.5 * math.log(np.linalg.det(k)) - 0.5 * n * math.log(2 * math.pi)


def _random_problem(rng, n, d=1):
    x = rng.uniform(-3, 3, size=(n, d))
    k = kern.kernel(kern.SE(rng.uniform(0.5, 2), rng.uniform(0.3, 2)), kern.Noise(rng.uniform(0.05, 0.5)))
    y = rng.normal(size=n)
    return x, y, k


class TestFit:
    def test_toy_cholesky_reconstructs_reference_k(self, toy_kernel):
        m = gpr.fit(TOY_X, np.zeros(6), toy_kernel)
        np.testing.assert_allclose(m.chol.lower @ m.chol.lower.T, TOY_K, atol=0.02)

    def test_single_point(self):
        k = kern.kernel(kern.SE(1.5, 1.0), kern.Noise(0.5))
        m = gpr.fit([0.3], [2.0], k)
        assert m.alpha[0] == pytest.approx(2.0 / (1.5**2 + 0.5**2), rel=1e-14)

    def test_zero_targets(self, toy_kernel):
        m = gpr.fit(TOY_X, np.zeros(6), toy_kernel)
        assert np.all(m.alpha == 0)

    def test_k_alpha_equals_y(self, rng):
        x, y, k = _random_problem(rng, 12)
        m = gpr.fit(x, y, k)
        np.testing.assert_allclose(kern.gram(k, x) @ m.alpha, y, atol=1e-8)

    def test_model_is_read_only(self, toy_kernel):
        m = gpr.fit(TOY_X, np.ones(6), toy_kernel)
        with pytest.raises(ValueError):
            m.alpha[0] = 1.0

    @pytest.mark.parametrize(
        "xs, y, exc",
        [([], [], EmptyData), ([0.0, 1.0], [1.0], DimensionMismatch), ([0.0, np.nan], [1.0, 2.0], NonFinite)],
    )
    def test_errors(self, toy_kernel, xs, y, exc):
        with pytest.raises(exc):
            gpr.fit(xs, y, toy_kernel)


class TestPredict:
    def test_toy_variance(self, toy_kernel):
        m = gpr.fit(TOY_X, np.zeros(6), toy_kernel)
        p = gpr.predict(m, [0.2])
        assert p.variance[0] == pytest.approx(0.21, abs=0.02)

    def test_zero_targets_mean_zero(self, toy_kernel, rng):
        y = rng.normal(size=6)
        xt = np.linspace(-3, 3, 17)
        a = gpr.predict(gpr.fit(TOY_X, y, toy_kernel), xt)
        b = gpr.predict(gpr.fit(TOY_X, np.zeros(6), toy_kernel), xt)
        assert np.all(b.mean == 0)
        np.testing.assert_array_equal(a.variance, b.variance)

    def test_single_point_closed_form(self):
        k = kern.kernel(kern.SE(1.3, 0.8), kern.Noise(0.2))
        m = gpr.fit([0.5], [1.7], k)
        xt = np.array([-1.0, 0.5, 2.0])
        expected = 1.7 * 1.3**2 * np.exp(-((xt - 0.5) ** 2) / (2 * 0.8**2)) / (1.3**2 + 0.2**2)
        np.testing.assert_allclose(gpr.predict(m, xt).mean, expected, rtol=1e-12)

    def test_dimension_mismatch(self, toy_kernel):
        m = gpr.fit(TOY_X, np.zeros(6), toy_kernel)
        with pytest.raises(DimensionMismatch):
            gpr.predict(m, np.zeros((3, 2)))

    def test_full_cov_diagonal_matches_pointwise(self, toy_kernel, rng):
        m = gpr.fit(TOY_X, rng.normal(size=6), toy_kernel)
        p = gpr.predict(m, np.linspace(-2, 1, 9), full_cov=True)
        np.testing.assert_allclose(np.diag(p.cov), p.variance, atol=1e-12)
        np.testing.assert_allclose(p.cov, p.cov.T, atol=1e-14)

    def test_band(self):
        p = gpr.Prediction(np.array([1.0]), np.array([4.0]))
        lo, hi = p.band()
        assert (lo[0], hi[0]) == pytest.approx((1 - 3.92, 1 + 3.92))


class TestLogMarginal:
    def test_scalar_zero_target(self):
        k = kern.kernel(kern.SE(1.2, 1.0), kern.Noise(0.4))
        v = 1.2**2 + 0.4**2
        m = gpr.fit([0.0], [0.0], k)
        assert gpr.log_marginal_likelihood(m) == pytest.approx(-0.5 * math.log(v) - 0.5 * math.log(2 * math.pi), rel=1e-14)

    @pytest.mark.parametrize("n", range(1, 9))
    def test_dense_oracle(self, n, rng):
        x, y, k = _random_problem(rng, n, d=2)
        m = gpr.fit(x, y, k)
        assert gpr.log_marginal_likelihood(m) == pytest.approx(_dense_log_ml(kern.gram(k, x), y), abs=1e-9)

    def test_scaling_targets_lowers_evidence(self, toy_kernel, rng):
        y = rng.normal(size=6)
        base = gpr.log_marginal_likelihood(gpr.fit(TOY_X, y, toy_kernel))
        scaled = gpr.log_marginal_likelihood(gpr.fit(TOY_X, 10 * y, toy_kernel))
        assert scaled < base


class TestInvariants:
    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 15))
    def test_variance_bounds(self, seed, n):
        rng = np.random.default_rng(seed)
        x, y, k = _random_problem(rng, n)
        xt = rng.uniform(-5, 5, size=(20, 1))
        p = gpr.predict(gpr.fit(x, y, k), xt)
        kss = kern.self_variance(k, xt)
        assert np.all(p.variance >= 0)
        assert np.all(p.variance <= kss + 1e-12)

    def test_noise_free_interpolation(self, rng):
        x = np.linspace(-2, 2, 7)[:, None]
        y = np.sin(2 * x[:, 0])
        k = kern.kernel(kern.SE(1.0, 0.7))
        p = gpr.predict(gpr.fit(x, y, k), x)
        np.testing.assert_allclose(p.mean, y, atol=1e-6)
        assert np.all(p.variance <= 1e-6)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_mean_linear_in_targets(self, seed):
        rng = np.random.default_rng(seed)
        x, y1, k = _random_problem(rng, 10)
        y2 = rng.normal(size=10)
        xt = rng.uniform(-4, 4, size=(15, 1))
        m = lambda y: gpr.predict(gpr.fit(x, y, k), xt).mean
        np.testing.assert_allclose(m(y1 + y2), m(y1) + m(y2), atol=1e-10)

    def test_far_extrapolation(self, toy_kernel, rng):
        p = gpr.predict(gpr.fit(TOY_X, rng.normal(size=6), toy_kernel), [100.0, -100.0])
        np.testing.assert_allclose(p.mean, 0.0, atol=1e-8)
        np.testing.assert_allclose(p.variance, 1.27**2 + 0.3**2, atol=1e-8)

    def test_band_calibration(self):
        rng = np.random.default_rng(7)
        k = kern.kernel(kern.SE(1.0, 0.8), kern.Noise(0.2))
        x = rng.uniform(-4, 4, size=240)
        y = gpr.sample_prior(k, x, rng)
        train, test = slice(0, 40), slice(40, 240)
        p = gpr.predict(gpr.fit(x[train], y[train], k), x[test])
        lo, hi = p.band(1.96)
        inside = np.mean((y[test] >= lo) & (y[test] <= hi))
        assert 0.90 <= inside <= 0.99


class TestConditionGaussian:
    def test_uncorrelated(self, rng):
        b = np.array([[2.0, 0.3], [0.3, 1.0]])
        mean, cov = gpr.condition_gaussian([1.0, -2.0], np.eye(2), b, np.zeros((2, 2)))
        np.testing.assert_array_equal(mean, 0.0)
        np.testing.assert_array_equal(cov, b)

    @pytest.mark.parametrize("rho", [-0.9, -0.3, 0.0, 0.5, 0.99])
    def test_bivariate(self, rho):
        mean, cov = gpr.condition_gaussian([1.5], [[1.0]], [[1.0]], [[rho]])
        assert mean[0] == pytest.approx(rho * 1.5, abs=1e-15)
        assert cov[0, 0] == pytest.approx(1 - rho**2, abs=1e-15)

    def test_predict_is_conditioning(self, toy_kernel, rng):
        y = rng.normal(size=6)
        xt = np.array([-2.0, 0.2, 0.7])
        p = gpr.predict(gpr.fit(TOY_X, y, toy_kernel), xt, full_cov=True)
        kss = kern.cross(toy_kernel, xt, xt) + toy_kernel.noise_variance * np.eye(3)
        mean, cov = gpr.condition_gaussian(y, kern.gram(toy_kernel, TOY_X), kss, kern.cross(toy_kernel, TOY_X, xt))
        np.testing.assert_allclose(p.mean, mean, atol=1e-10)
        np.testing.assert_allclose(p.cov, cov, atol=1e-10)

    def test_nonconforming(self):
        with pytest.raises(DimensionMismatch):
            gpr.condition_gaussian([1.0], np.eye(2), np.eye(1), np.zeros((1, 2)))


class TestOptimize:
    def test_recovers_length_scale(self):
        rng = np.random.default_rng(11)
        truth = kern.kernel(kern.SE(1.0, 0.6, fixed=frozenset({"sf"})), kern.Noise(0.1, fixed=frozenset({"sn"})))
        x = rng.uniform(-5, 5, size=50)
        y = gpr.sample_prior(truth, x, rng)
        start = kern.kernel(kern.SE(1.0, 2.0, fixed=frozenset({"sf"})), kern.Noise(0.1, fixed=frozenset({"sn"})))
        fitted, _ = gpr.optimize_hyperparams(x, y, start)
        assert fitted.terms[0].length == pytest.approx(0.6, rel=0.25)

    def test_zero_variance_targets(self):
        x = np.linspace(-1, 1, 8)
        start = kern.parse_kernel_spec("se(sf=1,l=1)+noise(sn=0.1!)")
        fitted, log_ml = gpr.optimize_hyperparams(x, np.zeros(8), start)
        assert math.isfinite(log_ml)
        assert fitted.terms[0].sigma_f < 1e-2

    def test_deterministic(self, toy_kernel, rng):
        y = rng.normal(size=6)
        a = gpr.optimize_hyperparams(TOY_X, y, toy_kernel)
        b = gpr.optimize_hyperparams(TOY_X, y, toy_kernel)
        assert a[1] == b[1] and a[0] == b[0]

    def test_requires_free_parameter(self):
        with pytest.raises(ValueError):
            gpr.optimize_hyperparams(TOY_X, np.ones(6), kern.parse_kernel_spec("se(sf=1!,l=1!)"))


def test_sample_prior_shape(toy_kernel, rng):
    assert gpr.sample_prior(toy_kernel, TOY_X, rng).shape == (6,)
    assert gpr.sample_prior(toy_kernel, TOY_X, rng, size=4).shape == (6, 4)
