import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize as spo
from scipy.special import ndtr
from scipy.stats import norm

from gptoolkit import gpc
from gptoolkit import kernels as kern
from gptoolkit.errors import DimensionMismatch, InputError, SingleClassData

from conftest import random_spd

SE1 = kern.parse_kernel_spec("se(sf=1,l=1)")


def _phi_ratio(z):
    return norm.pdf(z) / norm.cdf(z)


def _toy_binary(n=10, span=4.5):
    # negatives left of 0, positives right; the data extend past [-2, 2]
    # so that the probability has no room to revert toward 0.5 inside it
    x = np.linspace(-span, span, n)
    return x, np.where(x > 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# probit


class TestProbit:
    def test_zero(self):
        assert gpc.probit(0.0) == 0.5

    @pytest.mark.parametrize("f", [0.5, 1.0, 2.0, 5.0])
    def test_symmetry(self, f):
        assert gpc.probit(f) + gpc.probit(-f) == pytest.approx(1.0, abs=1e-15)

    def test_quadrature(self):
        value, _ = integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), -np.inf, 1.96)
        assert gpc.probit(1.96) == pytest.approx(value, abs=1e-12)
        assert gpc.probit(1.96) == pytest.approx(0.975, abs=1e-4)

    def test_tails_keep_relative_precision(self):
        # Phi(-10) = 7.6198530241605e-24
        assert gpc.probit(-10.0) == pytest.approx(7.619853024160527e-24, rel=1e-12)


# ---------------------------------------------------------------------------
# binary mode


class TestFindMode:
    def test_antisymmetric_pair(self):
        k = kern.gram(SE1, [-0.7, 0.7])
        mode = gpc.find_mode(k, [1.0, -1.0])
        assert mode.f_hat[0] == pytest.approx(-mode.f_hat[1], abs=1e-9)
        assert mode.f_hat[0] > 0

    def test_scalar_fixed_point(self):
        mode = gpc.find_mode([[1.0]], [1.0])
        root = spo.brentq(lambda f: f - _phi_ratio(f), 0.0, 2.0, xtol=1e-14)
        assert mode.f_hat[0] == pytest.approx(root, abs=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        k = random_spd(rng, 2, cond_boost=0.5) / 2
        y = rng.choice([-1.0, 1.0], size=2)
        grid = np.linspace(-4, 4, 400)
        f1, f2 = np.meshgrid(grid, grid, indexing="ij")
        f = np.stack([f1.ravel(), f2.ravel()])
        kinv = np.linalg.inv(k)
        obj = norm.logcdf(y[0] * f[0]) + norm.logcdf(y[1] * f[1]) - 0.5 * np.einsum("ip,ij,jp->p", f, kinv, f)
        best = f[:, np.argmax(obj)]
        mode = gpc.find_mode(k, y)
        assert np.all(np.abs(mode.f_hat - best) <= grid[1] - grid[0])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
    def test_mode_properties(self, seed, n):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-3, 3, size=n)
        k = kern.gram(kern.kernel(kern.SE(rng.uniform(0.5, 3), rng.uniform(0.3, 2))), x)
        y = rng.choice([-1.0, 1.0], size=n)
        mode = gpc.find_mode(k, y)
        assert gpc.mode_residual(k, y, mode.f_hat) < 1e-6
        assert np.all(mode.w_diag > 0)
        # monotone up to rounding: the final Newton steps move psi by ~eps
        noise = 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(mode.trace[:-1]))
        assert np.all(np.diff(mode.trace) >= -noise)

    def test_label_validation(self):
        with pytest.raises(InputError):
            gpc.find_mode(np.eye(2), [1.0, 0.0])
        with pytest.raises(DimensionMismatch):
            gpc.find_mode(np.eye(3), [1.0, -1.0])


# ---------------------------------------------------------------------------
# binary prediction


class TestBinaryPrediction:
    def test_far_field(self):
        x, y = _toy_binary()
        m = gpc.fit_binary(x, y, kern.parse_kernel_spec("se(sf=1.5,l=0.8)"))
        mean, var = gpc.predict_latent(m, [60.0, -60.0])
        np.testing.assert_allclose(mean, 0.0, atol=1e-12)
        np.testing.assert_allclose(var, 1.5**2, atol=1e-12)
        np.testing.assert_allclose(gpc.predict_prob(m, [60.0]), 0.5, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_variance_exceeds_noise_free_regression(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-2, 2, size=8)
        y = rng.choice([-1.0, 1.0], size=8)
        y[:2] = [-1.0, 1.0]
        m = gpc.fit_binary(x, y, SE1)
        xt = rng.uniform(-2.5, 2.5, size=10)
        _, var = gpc.predict_latent(m, xt)
        k = kern.gram(SE1, x)
        ks = kern.cross(SE1, x, xt)
        gpr_var = 1.0 - np.einsum("ij,ji->i", ks, np.linalg.solve(k, ks.T))
        assert np.all(var > gpr_var)

    def test_single_point_closed_form(self):
        # one label can't be fitted through fit_binary; build the model from the mode directly
        x = np.array([[0.3]])
        k = kern.gram(SE1, x)
        mode = gpc.find_mode(k, [1.0])
        m = gpc.BinaryGpcModel(x, np.array([1.0]), SE1, mode.f_hat, mode.w_diag, mode.alpha,
                               gpc._b_factor(k, np.sqrt(mode.w_diag)), mode.iterations, tuple(mode.trace))
        xt = np.array([-1.0, 0.3, 1.4])
        kstar = np.exp(-0.5 * (xt - 0.3) ** 2)
        mean, var = gpc.predict_latent(m, xt)
        np.testing.assert_allclose(mean, kstar * mode.f_hat[0] / 1.0, rtol=1e-12)
        np.testing.assert_allclose(var, 1.0 - kstar**2 / (1.0 + 1.0 / mode.w_diag[0]), rtol=1e-12)

    @pytest.mark.parametrize("mu, s2", [(1.0, 1.0), (-0.4, 2.5), (2.0, 0.1)])
    def test_squash_quadrature(self, mu, s2):
        value, _ = integrate.quad(lambda f: norm.cdf(f) * norm.pdf(f, mu, math.sqrt(s2)), -np.inf, np.inf, epsabs=1e-13)
        assert gpc.squash(mu, s2) == pytest.approx(value, abs=1e-6)

    def test_squash_limits(self):
        assert gpc.squash(0.0, 7.0) == 0.5
        assert gpc.squash(0.8, 0.0) == pytest.approx(gpc.probit(0.8), abs=1e-15)
        assert gpc.squash(1.0, 1.0) == pytest.approx(0.7602499389, abs=1e-9)

    def test_label_flip(self):
        x, y = _toy_binary()
        xt = np.linspace(-3, 3, 31)
        p = gpc.predict_prob(gpc.fit_binary(x, y, SE1), xt)
        q = gpc.predict_prob(gpc.fit_binary(x, -y, SE1), xt)
        np.testing.assert_allclose(p, 1.0 - q, atol=1e-9)
        assert np.all((p > 0) & (p < 1))

    def test_monotone_on_toy(self):
        x, y = _toy_binary()
        p = gpc.predict_prob(gpc.fit_binary(x, y, SE1), np.linspace(-2, 2, 21))
        assert np.all(np.diff(p) > 0)

    def test_duplicated_data_keeps_sign(self):
        x, y = _toy_binary()
        xt = np.linspace(-2.1, 2.1, 22)  # skips x = 0, where p = 0.5 exactly by symmetry
        p1 = gpc.predict_prob(gpc.fit_binary(x, y, SE1), xt)
        p2 = gpc.predict_prob(gpc.fit_binary(np.repeat(x, 2), np.repeat(y, 2), SE1), xt)
        np.testing.assert_array_equal(np.sign(p1 - 0.5), np.sign(p2 - 0.5))

    def test_fit_rejects_noise_and_single_class(self):
        x, y = _toy_binary()
        with pytest.raises(InputError):
            gpc.fit_binary(x, y, kern.parse_kernel_spec("se(sf=1,l=1)+noise(sn=0.1)"))
        with pytest.raises(SingleClassData):
            gpc.fit_binary(x, np.ones_like(y), SE1)

    def test_optimize_does_not_lower_evidence(self):
        x, y = _toy_binary()
        start = gpc.fit_binary(x, y, SE1)
        tuned = gpc.fit_binary(x, y, SE1, optimize=True)
        assert gpc.log_marginal_binary(tuned) >= gpc.log_marginal_binary(start)


# ---------------------------------------------------------------------------
# binary evidence


class TestLogMarginalBinary:
    def test_scalar_oracle(self):
        x = np.array([[0.0]])
        mode = gpc.find_mode([[1.0]], [1.0])
        m = gpc.BinaryGpcModel(x, np.array([1.0]), SE1, mode.f_hat, mode.w_diag, mode.alpha,
                               gpc._b_factor(np.eye(1), np.sqrt(mode.w_diag)), mode.iterations, ())
        f = spo.brentq(lambda t: t - _phi_ratio(t), 0.0, 2.0, xtol=1e-14)
        r = _phi_ratio(f)
        w = r * r + f * r
        expected = -0.5 * f * f + norm.logcdf(f) - 0.5 * math.log(1 + w)
        assert gpc.log_marginal_binary(m) == pytest.approx(expected, abs=1e-10)

    def test_permutation_invariance(self, rng):
        x = rng.uniform(-2, 2, size=9)
        y = np.where(x + 0.3 * rng.normal(size=9) > 0, 1.0, -1.0)
        perm = rng.permutation(9)
        a = gpc.log_marginal_binary(gpc.fit_binary(x, y, SE1))
        b = gpc.log_marginal_binary(gpc.fit_binary(x[perm], y[perm], SE1))
        assert a == pytest.approx(b, abs=1e-10)

    @pytest.mark.parametrize("xs, y", [([-0.5, 0.5], [-1.0, 1.0]), ([-0.2, 1.0], [1.0, 1.0]), ([0.0, 2.0], [1.0, -1.0])])
    def test_two_point_quadrature(self, xs, y):
        k = kern.gram(SE1, xs)
        y = np.array(y)
        # product Gauss-Hermite rule over f = L z, z ~ N(0, I)
        nodes, weights = np.polynomial.hermite_e.hermegauss(120)
        weights = weights / math.sqrt(2 * math.pi)
        z1, z2 = np.meshgrid(nodes, nodes, indexing="ij")
        f = np.linalg.cholesky(k) @ np.stack([z1.ravel(), z2.ravel()])
        value = float(np.outer(weights, weights).ravel() @ (ndtr(y[0] * f[0]) * ndtr(y[1] * f[1])))
        mode = gpc.find_mode(k, y)
        m = gpc.BinaryGpcModel(np.asarray(xs)[:, None], y, SE1, mode.f_hat, mode.w_diag, mode.alpha,
                               gpc._b_factor(k, np.sqrt(mode.w_diag)), mode.iterations, ())
        laplace = gpc.log_marginal_binary(m)
        assert abs(laplace - math.log(value)) <= 0.05 * abs(math.log(value))


# ---------------------------------------------------------------------------
# multi-class


def _three_class(n_per=8, seed=0):
    rng = np.random.default_rng(seed)
    centres = np.array([-2.0, 0.0, 2.0])
    x = np.concatenate([c + 0.5 * rng.normal(size=n_per) for c in centres])
    labels = np.repeat(np.arange(3), n_per)
    return x, labels


def _logistic_laplace(k, t):
    """Laplace evidence for p(t|g) = sigmoid(t g), g ~ N(0, K), dense and direct."""
    g = np.zeros(len(t))
    for _ in range(100):
        s = 1 / (1 + np.exp(-t * g))
        grad = t * (1 - s)
        w = s * (1 - s)
        g_new = np.linalg.solve(np.linalg.inv(k) + np.diag(w), w * g + grad)
        if np.max(np.abs(g_new - g)) < 1e-13:
            g = g_new
            break
        g = g_new
    s = 1 / (1 + np.exp(-t * g))
    w = s * (1 - s)
    return -0.5 * g @ np.linalg.solve(k, g) + np.sum(np.log(s)) - 0.5 * math.log(np.linalg.det(np.eye(len(t)) + k @ np.diag(w)))


class TestSoftmax:
    def test_equal(self):
        np.testing.assert_allclose(gpc.softmax([3.0, 3.0, 3.0, 3.0]), 0.25, rtol=1e-15)

    def test_shift_invariance(self, rng):
        f = rng.normal(size=(5, 4))
        np.testing.assert_allclose(gpc.softmax(f), gpc.softmax(f + 17.3), rtol=1e-12)

    def test_overflow(self):
        np.testing.assert_array_equal(gpc.softmax([1000.0, 0.0]), [1.0, 0.0])


class TestFindModeMulti:
    def test_onehot_validation(self):
        with pytest.raises(InputError):
            gpc.find_mode_multi([np.eye(2)] * 2, [1, 0, 1, 0])  # point 0 in both classes
        with pytest.raises(InputError):
            gpc.find_mode_multi([np.eye(2)] * 2, [0.5, 0.5, 0.5, 0.5])
        with pytest.raises(DimensionMismatch):
            gpc.find_mode_multi([np.eye(2)] * 2, [1, 0, 0])

    def test_grid_oracle_single_point(self):
        y = np.array([0.0, 1.0, 0.0])
        mode = gpc.find_mode_multi([np.eye(1)] * 3, y)
        grid = np.linspace(-4, 4, 161)
        f = np.stack(np.meshgrid(grid, grid, grid, indexing="ij"), axis=-1).reshape(-1, 3)
        obj = f @ y - np.log(np.sum(np.exp(f), axis=1)) - 0.5 * np.sum(f * f, axis=1)
        best = f[np.argmax(obj)]
        assert np.all(np.abs(mode.f_hat - best) <= grid[1] - grid[0])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10), c=st.integers(2, 3))
    def test_w_psd_and_normalized(self, seed, n, c):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-3, 3, size=n)
        ks = [kern.gram(kern.kernel(kern.SE(rng.uniform(0.5, 2), rng.uniform(0.3, 2))), x) for _ in range(c)]
        labels = rng.integers(0, c, size=n)
        mode = gpc.find_mode_multi(ks, gpc.onehot(labels, c))
        w = gpc.w_matrix(mode.pi_hat, c)
        np.testing.assert_allclose(w, w.T, atol=0)
        assert np.min(np.linalg.eigvalsh(w)) >= -1e-10
        np.testing.assert_allclose(mode.pi_hat.reshape(c, n).sum(axis=0), 1.0, atol=1e-12)
        # near the mode, steps are accepted on residual decrease when the
        # objective only changes at rounding level
        noise = 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(mode.trace[1:]))
        assert np.all(np.diff(mode.trace) >= -noise)
        assert mode.Pi.shape == (c * n, n)


class TestMultiModel:
    def test_two_class_agrees_with_binary(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            x = np.concatenate([rng.uniform(-3, -0.3, 6), rng.uniform(0.3, 3, 6)])
            labels = np.repeat([0, 1], 6)
            multi = gpc.fit_multi(x, labels, SE1)
            binary = gpc.fit_binary(x, np.where(labels == 1, 1.0, -1.0), SE1)
            xt = np.concatenate([x, rng.uniform(-3, -0.3, 25), rng.uniform(0.3, 3, 25)])
            arg_multi = np.argmax(gpc.predict_multi(multi, xt), axis=1)
            arg_binary = (gpc.predict_prob(binary, xt) > 0.5).astype(int)
            np.testing.assert_array_equal(arg_multi, arg_binary)
            np.testing.assert_array_equal(np.argmax(multi.f_hat.reshape(2, -1), axis=0), (binary.f_hat > 0).astype(int))

    def test_far_field(self):
        x, labels = _three_class()
        m = gpc.fit_multi(x, labels, SE1)
        for c in range(3):
            mean, var = gpc.predict_latent_multi(m, [80.0], c)
            assert abs(mean[0]) < 1e-12 and var[0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(gpc.predict_multi(m, [80.0]), 1 / 3, atol=1e-12)

    def test_variance_positive_and_probs_normalized(self, rng):
        x, labels = _three_class(seed=3)
        m = gpc.fit_multi(x, labels, SE1)
        xt = rng.uniform(-4, 4, size=40)
        for c in range(3):
            assert np.all(gpc.predict_latent_multi(m, xt, c)[1] > 0)
        np.testing.assert_allclose(gpc.predict_multi(m, xt).sum(axis=1), 1.0, atol=1e-12)

    def test_per_class_kernels(self):
        x, labels = _three_class()
        ks = [kern.parse_kernel_spec(f"se(sf=1,l={l})") for l in (0.5, 1.0, 2.0)]
        m = gpc.fit_multi(x, labels, ks)
        assert m.kernels == tuple(ks)
        with pytest.raises(DimensionMismatch):
            gpc.fit_multi(x, labels, ks[:2])

    def test_label_validation(self):
        with pytest.raises(InputError):
            gpc.fit_multi([0.0, 1.0], [0.5, 1.0], SE1)
        with pytest.raises(SingleClassData):
            gpc.fit_multi([0.0, 1.0], [1, 1], SE1)


class TestLogMarginalMulti:
    def test_class_permutation(self):
        x, labels = _three_class(seed=5)
        base = gpc.log_marginal_multi(gpc.fit_multi(x, labels, SE1))
        relabelled = np.array([2, 0, 1])[labels]
        assert gpc.log_marginal_multi(gpc.fit_multi(x, relabelled, SE1)) == pytest.approx(base, abs=1e-9)

    def test_scalar_oracle(self):
        # n = 1, C = 2, K blocks = [1]
        m = gpc.fit_multi([0.0, 5000.0], [0, 1], SE1)  # two independent points, each with K = 1
        y = gpc.onehot(m.labels, 2)
        total = 0.0
        for i in range(2):
            f = m.f_hat.reshape(2, 2)[:, i]
            pi = np.exp(f) / np.exp(f).sum()
            w = np.diag(pi) - np.outer(pi, pi)
            total += -0.5 * f @ f + y.reshape(2, 2)[:, i] @ f - math.log(np.exp(f).sum()) - 0.5 * math.log(np.linalg.det(np.eye(2) + w))
        assert gpc.log_marginal_multi(m) == pytest.approx(total, abs=1e-10)

    def test_two_class_equals_logistic_with_doubled_prior(self):
        # with C = 2 only g = f0 - f1 feels the likelihood, sigmoid(g), and g ~ N(0, 2K)
        rng = np.random.default_rng(2)
        x = rng.uniform(-3, 3, size=10)
        labels = (x + 0.4 * rng.normal(size=10) > 0).astype(int)
        labels[:2] = [0, 1]
        m = gpc.fit_multi(x, labels, SE1)
        t = np.where(labels == 0, 1.0, -1.0)
        expected = _logistic_laplace(2 * kern.gram(SE1, x), t)
        assert gpc.log_marginal_multi(m) == pytest.approx(expected, abs=1e-7)

    @pytest.mark.xfail(strict=True, reason="softmax and probit evidences are different models; the gap reaches ~8%")
    def test_two_class_within_five_percent_of_probit(self):
        gaps = []
        for seed in range(8):
            rng = np.random.default_rng(seed)
            x = rng.uniform(-3, 3, size=12)
            y = np.where(x + 0.5 * rng.normal(size=12) > 0, 1.0, -1.0)
            multi = gpc.log_marginal_multi(gpc.fit_multi(x, (y > 0).astype(int), SE1))
            binary = gpc.log_marginal_binary(gpc.fit_binary(x, y, SE1))
            gaps.append(abs(multi - binary) / abs(binary))
        assert max(gaps) <= 0.05
