"""Gaussian-process classification with the Laplace approximation.

Binary problems use the probit likelihood ``p(y|f) = Phi(y f)`` with
labels in {-1, +1}; the posterior mode is found by Newton's method.
Multi-class problems stack one latent function per class, use softmax,
and find the mode with the damped fixed-point update ``f <- K (y - pi)``.

Classifier kernels must be noise free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

from . import kernels as kern
from .errors import (
    DimensionMismatch,
    GPError,
    InputError,
    NoConvergence,
    NonFiniteStart,
    OptimizerDiverged,
    SingleClassData,
)
from .gpr import LOG_PARAM_BOUND
from .numerics import CholFactor, chol_solve, cholesky, solve_lower
from .optimize import OptOptions, nelder_mead

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def probit(f):
    """Standard normal CDF.

    Evaluated with Cephes ``ndtr`` (via SciPy), which switches between
    ``erf`` and ``erfc`` rational approximations so that both tails keep
    full relative precision.
    """
    out = ndtr(f)
    return float(out) if np.ndim(out) == 0 else out


def _probit_derivs(y, f):
    """log Phi(y f), its gradient in f and the negative Hessian diagonal."""
    z = y * f
    log_cdf = log_ndtr(z)
    ratio = np.exp(-0.5 * z * z - _HALF_LOG_2PI - log_cdf)  # phi(z) / Phi(z)
    grad = y * ratio
    w = ratio * (ratio + z)
    return log_cdf, grad, np.maximum(w, np.finfo(float).tiny)


def _b_factor(k, sqrt_w):
    b = np.eye(k.shape[0]) + sqrt_w[:, None] * k * sqrt_w[None, :]
    return cholesky(b)


class BinaryMode(NamedTuple):
    f_hat: np.ndarray
    w_diag: np.ndarray
    iterations: int
    alpha: np.ndarray
    trace: list


def _check_binary_labels(y):
    y = np.asarray(y, dtype=float).ravel()
    if not np.all((y == 1.0) | (y == -1.0)):
        raise InputError("binary labels must be -1 or +1")
    return y


def find_mode(k, y, max_iter: int = 50, tol: float = 1e-9) -> BinaryMode:
    """Newton iteration for the mode of the probit-Laplace posterior.

    Starts from ``f = 0`` and maximizes ``log p(y|f) - 1/2 f^T K^-1 f``.
    A step is halved until the objective does not decrease (beyond
    rounding), so the objective trace is monotone up to rounding.  ``alpha`` tracks ``K^-1 f`` without
    inverting ``K``.  Converged when the full (undamped) Newton step's
    infinity norm drops below ``tol``.
    """
    k = np.asarray(k, dtype=float)
    y = _check_binary_labels(y)
    n = y.size
    if k.shape != (n, n):
        raise DimensionMismatch(f"K is {k.shape} but there are {n} labels")

    f = np.zeros(n)
    alpha = np.zeros(n)
    psi = float(np.sum(log_ndtr(y * f)))
    trace = [psi]
    for it in range(1, max_iter + 1):
        _, grad, w = _probit_derivs(y, f)
        sw = np.sqrt(w)
        chol = _b_factor(k, sw)
        b = w * f + grad
        alpha_new = b - sw * chol_solve(chol, sw * (k @ b))
        f_new = k @ alpha_new

        # the last Newton steps move psi only at rounding level (possibly
        # downward) while still improving f, so such changes count as flat
        noise = 8.0 * np.finfo(float).eps * max(1.0, abs(psi))
        t = 1.0
        while True:
            f_t = f + t * (f_new - f)
            a_t = alpha + t * (alpha_new - alpha)
            psi_t = float(np.sum(log_ndtr(y * f_t)) - 0.5 * a_t @ f_t)
            if psi_t >= psi - noise or t < 1e-10:
                break
            t *= 0.5
        if psi_t < psi - noise:
            # no ascent possible at machine precision: we are at the mode
            _, _, w = _probit_derivs(y, f)
            return BinaryMode(f, w, it, alpha, trace)
        # judge convergence on the full Newton step, not the damped one
        step = float(np.max(np.abs(f_new - f)))
        f, alpha, psi = f_t, a_t, psi_t
        trace.append(psi)
        if step < tol:
            _, _, w = _probit_derivs(y, f)
            return BinaryMode(f, w, it, alpha, trace)
    _, grad, _ = _probit_derivs(y, f)
    raise NoConvergence(
        f"Newton iteration did not converge in {max_iter} steps",
        residual=float(np.max(np.abs(f - k @ grad))),
        iterations=max_iter,
    )


def mode_residual(k, y, f_hat) -> float:
    """``max |f - K grad log p(y|f)|``; zero exactly at the mode."""
    _, grad, _ = _probit_derivs(np.asarray(y, dtype=float), np.asarray(f_hat, dtype=float))
    return float(np.max(np.abs(f_hat - np.asarray(k) @ grad)))


@dataclass(frozen=True)
class BinaryGpcModel:
    xs: np.ndarray
    y: np.ndarray
    kernel: kern.KernelExpr
    f_hat: np.ndarray
    w_diag: np.ndarray
    alpha: np.ndarray
    chol_b: CholFactor
    iterations: int
    trace: tuple


def _classifier_kernel(kernel):
    if kernel.noise is not None:
        raise InputError("classifier kernels must not contain a noise term")
    return kernel


def _binary_from_gram(xs, y, kernel, k):
    mode = find_mode(k, y)
    chol_b = _b_factor(k, np.sqrt(mode.w_diag))
    return BinaryGpcModel(xs, y, kernel, mode.f_hat, mode.w_diag, mode.alpha, chol_b, mode.iterations, tuple(mode.trace))


def log_marginal_binary(model: BinaryGpcModel) -> float:
    """Laplace approximation to log p(y | x, theta).

    ``-1/2 f^T K^-1 f + sum log Phi(y_i f_i) - 1/2 log|I + K W|``, using
    ``|K| |K^-1 + W| = |I + W^1/2 K W^1/2|``.
    """
    f = model.f_hat
    return float(
        -0.5 * model.alpha @ f
        + np.sum(log_ndtr(model.y * f))
        - np.sum(np.log(np.diag(model.chol_b.lower)))
    )


def fit_binary(xs, labels, template: kern.KernelExpr, optimize: bool = False, opts: OptOptions | None = None) -> BinaryGpcModel:
    x = kern.as_inputs(xs)
    y = _check_binary_labels(labels)
    if x.shape[0] != y.size:
        raise DimensionMismatch(f"{x.shape[0]} inputs but {y.size} labels")
    if np.unique(y).size < 2:
        raise SingleClassData("both classes must be present")
    kernel = _classifier_kernel(template)
    if optimize:
        kernel = _optimize(lambda k: log_marginal_binary(_binary_from_gram(x, y, k, kern.gram(k, x))), kernel, opts)
    return _binary_from_gram(x, y, kernel, kern.gram(kernel, x))


def predict_latent(model: BinaryGpcModel, xs_test):
    """Latent mean ``K* K^-1 f_hat`` and variance ``K** - K* (K + W^-1)^-1 K*^T``."""
    xt = kern.as_inputs(xs_test)
    if xt.shape[1] != model.xs.shape[1]:
        raise DimensionMismatch(f"test inputs have d={xt.shape[1]}, training d={model.xs.shape[1]}")
    ks = kern.cross(model.kernel, model.xs, xt)
    mean = ks @ model.alpha
    v = solve_lower(model.chol_b, np.sqrt(model.w_diag)[:, None] * ks.T)
    var = kern.self_variance(model.kernel, xt) - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def squash(mean, var):
    """Expected probit under a Gaussian latent: ``Phi(mean / sqrt(1 + var))``."""
    return ndtr(np.asarray(mean) / np.sqrt(1.0 + np.asarray(var)))


def predict_prob(model: BinaryGpcModel, xs_test):
    mean, var = predict_latent(model, xs_test)
    return squash(mean, var)


# ---------------------------------------------------------------------------
# multi-class


def softmax(f):
    """Softmax over the last axis with max subtraction."""
    f = np.asarray(f, dtype=float)
    z = np.exp(f - np.max(f, axis=-1, keepdims=True))
    return z / np.sum(z, axis=-1, keepdims=True)


class MultiMode(NamedTuple):
    f_hat: np.ndarray
    pi_hat: np.ndarray
    Pi: np.ndarray
    iterations: int
    alpha: np.ndarray
    trace: list


def _class_major_softmax(f, n_classes):
    return softmax(f.reshape(n_classes, -1).T).T.ravel()


def _multi_objective(f, alpha, y, n_classes):
    lse = logsumexp(f.reshape(n_classes, -1), axis=0)
    return float(y @ f - np.sum(lse) - 0.5 * alpha @ f)


def stack_pi(pi, n_classes):
    """``Cn x n`` matrix of vertically stacked ``diag(pi^c)``."""
    n = pi.size // n_classes
    return np.vstack([np.diag(pi[c * n:(c + 1) * n]) for c in range(n_classes)])


def _check_onehot(y, n_classes, n):
    y = np.asarray(y, dtype=float).ravel()
    if y.size != n_classes * n:
        raise DimensionMismatch(f"one-hot vector has {y.size} entries, expected {n_classes * n}")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise InputError("one-hot targets must be 0 or 1")
    if not np.all(y.reshape(n_classes, n).sum(axis=0) == 1.0):
        raise InputError("each point needs exactly one class set in the one-hot targets")
    return y


def find_mode_multi(ks, y_onehot, max_iter: int = 200, tol: float = 1e-8) -> MultiMode:
    """Mode of the softmax-Laplace posterior.

    ``ks`` holds one ``n x n`` Gram matrix per class (the diagonal blocks
    of ``K``); ``y_onehot`` is class-major, ``y[c * n + i]``.  Each
    iteration proposes ``f_new = K (y - pi(f))``, which is ``K`` times the
    gradient of the log posterior and hence an ascent direction.  The
    step length along it is the full step or, when shorter and better, the
    maximizer of a parabola fitted along the direction; it is then halved
    until the log posterior rises by a small fraction of the first-order
    prediction (Armijo).  Once the log posterior no longer resolves the
    step, a step that shrinks the fixed-point residual is accepted instead,
    so the recorded trace is non-decreasing up to rounding.  Converged when
    ``max |K (y - pi) - f| < tol``.
    """
    ks = [np.asarray(k, dtype=float) for k in ks]
    n_classes = len(ks)
    n = ks[0].shape[0]
    if any(k.shape != (n, n) for k in ks):
        raise DimensionMismatch("per-class Gram matrices must all be n x n")
    y = _check_onehot(y_onehot, n_classes, n)

    def k_times(v):
        blocks = v.reshape(n_classes, n)
        return np.concatenate([ks[c] @ blocks[c] for c in range(n_classes)])

    f = np.zeros(n_classes * n)
    alpha = np.zeros_like(f)
    psi = _multi_objective(f, alpha, y, n_classes)
    trace = [psi]
    for it in range(1, max_iter + 1):
        pi = _class_major_softmax(f, n_classes)
        alpha_new = y - pi
        f_new = k_times(alpha_new)
        direction = f_new - f
        # the full fixed-point residual, not the damped step, decides convergence
        if float(np.max(np.abs(direction))) < tol:
            return MultiMode(f, pi, stack_pi(pi, n_classes), it, alpha, trace)
        # directional derivative: grad psi = y - pi - K^-1 f and direction = K grad psi
        slope = float((alpha_new - alpha) @ direction)

        def at(t):
            f_t = f + t * direction
            a_t = alpha + t * (alpha_new - alpha)
            return f_t, a_t, _multi_objective(f_t, a_t, y, n_classes)

        t = 1.0
        f_t, a_t, psi_t = at(t)
        # the full step overshoots whenever K W has eigenvalues near 1 and
        # then oscillates slowly; the maximizer of the parabola through
        # psi(f), its slope and psi(f + direction) is a better step length
        curvature = psi_t - psi - slope
        if curvature < 0:
            t_par = min(1.0, max(0.1, -slope / (2.0 * curvature)))
            if t_par < 1.0:
                cand = at(t_par)
                if cand[2] > psi_t:
                    t, (f_t, a_t, psi_t) = t_par, cand
        # Armijo halving as the safeguard.  Close to the mode psi stops
        # resolving the step (changes at rounding level); there a step is
        # accepted when it shrinks the fixed-point residual instead.
        residual = float(np.max(np.abs(direction)))
        noise = 8.0 * np.finfo(float).eps * max(1.0, abs(psi))

        def acceptable(t, f_t, psi_t):
            if psi_t >= psi + 1e-4 * t * slope:
                return True
            if abs(psi_t - psi) <= noise:
                r_t = np.max(np.abs(k_times(y - _class_major_softmax(f_t, n_classes)) - f_t))
                return r_t < residual
            return False

        while not acceptable(t, f_t, psi_t):
            t *= 0.5
            if t < 1e-10:
                # no ascent left at machine precision
                return MultiMode(f, pi, stack_pi(pi, n_classes), it, alpha, trace)
            f_t, a_t, psi_t = at(t)
        f, alpha, psi = f_t, a_t, psi_t
        trace.append(psi)
    raise NoConvergence(
        f"multi-class mode iteration did not converge in {max_iter} steps",
        residual=float(np.max(np.abs(f - k_times(y - _class_major_softmax(f, n_classes))))),
        iterations=max_iter,
    )


def w_matrix(pi_hat, n_classes):
    """``W = diag(pi) - Pi Pi^T``."""
    big_pi = stack_pi(pi_hat, n_classes)
    return np.diag(pi_hat) - big_pi @ big_pi.T


@dataclass(frozen=True)
class MultiGpcModel:
    xs: np.ndarray
    labels: np.ndarray
    n_classes: int
    kernels: tuple
    f_hat: np.ndarray
    pi_hat: np.ndarray
    alpha: np.ndarray
    grams: tuple
    iterations: int
    trace: tuple

    @property
    def n(self) -> int:
        return self.labels.size

    def block(self, vec, c):
        return vec[c * self.n:(c + 1) * self.n]

    @property
    def Pi(self):
        return stack_pi(self.pi_hat, self.n_classes)


def onehot(labels, n_classes):
    labels = np.asarray(labels, dtype=int)
    y = np.zeros((n_classes, labels.size))
    y[labels, np.arange(labels.size)] = 1.0
    return y.ravel()


def _check_class_labels(labels, n_classes=None):
    raw = np.asarray(labels, dtype=float).ravel()
    if not np.all(raw == np.round(raw)) or np.any(raw < 0):
        raise InputError("class labels must be integers 0..C-1")
    lab = raw.astype(int)
    c = int(lab.max()) + 1 if n_classes is None else int(n_classes)
    if lab.max() >= c:
        raise InputError(f"label {lab.max()} out of range for {c} classes")
    if np.unique(lab).size < 2:
        raise SingleClassData("at least two classes must be present")
    return lab, c


def _multi_from_grams(x, lab, c, kernels, grams):
    mode = find_mode_multi(grams, onehot(lab, c))
    return MultiGpcModel(x, lab, c, tuple(kernels), mode.f_hat, mode.pi_hat, mode.alpha, tuple(grams), mode.iterations, tuple(mode.trace))


def fit_multi(xs, labels, kernels, optimize: bool = False, opts: OptOptions | None = None, n_classes=None) -> MultiGpcModel:
    """Fit a softmax classifier.

    ``kernels`` is one kernel shared by every class or a sequence with one
    kernel per class.  With ``optimize`` set, a shared kernel's free
    parameters (or every per-class kernel's, concatenated) are tuned by
    Nelder-Mead on :func:`log_marginal_multi`.
    """
    x = kern.as_inputs(xs)
    lab, c = _check_class_labels(labels, n_classes)
    if x.shape[0] != lab.size:
        raise DimensionMismatch(f"{x.shape[0]} inputs but {lab.size} labels")
    shared = isinstance(kernels, kern.KernelExpr)
    klist = [kernels] * c if shared else list(kernels)
    if len(klist) != c:
        raise DimensionMismatch(f"{len(klist)} kernels for {c} classes")
    for k in klist:
        _classifier_kernel(k)

    def build(ks):
        return _multi_from_grams(x, lab, c, ks, [kern.gram(k, x) for k in ks])

    if optimize:
        if shared:
            best = _optimize(lambda k: log_marginal_multi(build([k] * c)), klist[0], opts)
            klist = [best] * c
        else:
            sizes = [kern.n_free(k) for k in klist]
            splits = np.cumsum(sizes)[:-1]

            def unpack_all(theta):
                return [kern.unpack(part, k) for part, k in zip(np.split(theta, splits), klist)]

            theta = _optimize_vector(
                lambda th: log_marginal_multi(build(unpack_all(th))),
                np.concatenate([kern.pack(k).values for k in klist]),
                opts,
            )
            klist = unpack_all(theta)
    return build(klist)


def _class_b_factor(gram, pi_c):
    return _b_factor(gram, np.sqrt(pi_c * (1.0 - pi_c)))


def predict_latent_multi(model: MultiGpcModel, xs_test, c: int):
    """Class-``c`` latent mean and variance at the test inputs.

    Mean ``K*^c (K^c)^-1 f_hat^c``; variance
    ``K**^c - K*^c (K^c + (W^c)^-1)^-1 K*^c^T`` with ``W^c`` the class-c
    diagonal block of ``W``, i.e. ``diag(pi^c (1 - pi^c))``.
    """
    xt = kern.as_inputs(xs_test)
    if xt.shape[1] != model.xs.shape[1]:
        raise DimensionMismatch(f"test inputs have d={xt.shape[1]}, training d={model.xs.shape[1]}")
    kc = model.kernels[c]
    ks = kern.cross(kc, model.xs, xt)
    mean = ks @ model.block(model.alpha, c)
    pi_c = model.block(model.pi_hat, c)
    chol = _class_b_factor(model.grams[c], pi_c)
    v = solve_lower(chol, np.sqrt(pi_c * (1.0 - pi_c))[:, None] * ks.T)
    var = kern.self_variance(kc, xt) - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def predict_multi(model: MultiGpcModel, xs_test):
    """``(m, C)`` class probabilities: softmax of the per-class latent means."""
    means = np.column_stack([predict_latent_multi(model, xs_test, c)[0] for c in range(model.n_classes)])
    return softmax(means)


def log_marginal_multi(model: MultiGpcModel) -> float:
    """``-1/2 f^T K^-1 f + y^T f - sum_i log sum_c exp f_i^c - 1/2 log|I + K W|``.

    With ``D = diag(pi)`` and ``W = D - Pi Pi^T`` the determinant splits as
    ``|I + K W| = prod_c |I + D_c^1/2 K_c D_c^1/2| * |sum_c E_c|`` where
    ``E_c = D_c^1/2 (I + D_c^1/2 K_c D_c^1/2)^-1 D_c^1/2``, because the
    class probabilities at each point sum to one.  No inverse of ``K`` is
    needed.
    """
    c_count, n = model.n_classes, model.n
    f = model.f_hat
    y = onehot(model.labels, c_count)
    fit_term = -0.5 * model.alpha @ f + y @ f - np.sum(logsumexp(f.reshape(c_count, n), axis=0))
    logdet = 0.0
    e_sum = np.zeros((n, n))
    for c in range(c_count):
        d = np.sqrt(model.block(model.pi_hat, c))
        chol = _b_factor(model.grams[c], d)
        logdet += 2.0 * np.sum(np.log(np.diag(chol.lower)))
        e_sum += d[:, None] * chol_solve(chol, np.diag(d))
    e_chol = cholesky(0.5 * (e_sum + e_sum.T))
    logdet += 2.0 * np.sum(np.log(np.diag(e_chol.lower)))
    return float(fit_term - 0.5 * logdet)


# ---------------------------------------------------------------------------


def _optimize_vector(objective, start, opts):
    opts = opts or OptOptions(max_evals=1000, tol_f=1e-8, tol_x=1e-6)

    def guarded(theta):
        if np.any(np.abs(theta) > LOG_PARAM_BOUND):
            return -math.inf
        try:
            return objective(theta)
        except GPError:
            return math.nan

    try:
        res = nelder_mead(guarded, start, opts)
    except NonFiniteStart as exc:
        raise OptimizerDiverged(f"log marginal likelihood not finite at the start: {exc}") from exc
    return res.x


def _optimize(objective_of_kernel, template, opts):
    if kern.n_free(template) == 0:
        return template
    theta = _optimize_vector(lambda th: objective_of_kernel(kern.unpack(th, template)), kern.pack(template).values, opts)
    return kern.unpack(theta, template)
