"""Gaussian-process latent variable model.

Each standardized data column is an independent GP over shared latent
coordinates ``X`` with kernel ``sigma^2 exp(-|x - x'|^2 / (2 l^2)) + delta / beta``.
``X`` and ``theta = (sigma, l, beta)`` are fitted jointly by scaled
conjugate gradients, starting from a PCA projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionMismatch, GPError, InputError, NonFinite, ZeroVarianceColumn
from .numerics import chol_solve, cholesky, log_det
from .optimize import OptOptions, scg

LOG_2PI = math.log(2.0 * math.pi)
# sigma, l and beta stay within [1e-8, 1e8] during fitting
LOG_THETA_BOUND = math.log(1e8)


@dataclass(frozen=True)
class Theta:
    sigma: float
    length: float
    beta: float

    def log(self):
        return np.log([self.sigma, self.length, self.beta])

    @classmethod
    def from_log(cls, v):
        s, l, b = np.exp(np.asarray(v, dtype=float))
        return cls(float(s), float(l), float(b))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.scale

    def inverse_transform(self, y_std):
        return np.asarray(y_std, dtype=float) * self.scale + self.mean


def preprocess(y_raw):
    """Centre every column and scale it to unit (population) variance.

    Returns ``(y_std, standardizer)``.
    """
    y = np.asarray(y_raw, dtype=float)
    if y.ndim != 2 or y.shape[0] < 2:
        raise InputError(f"need an n x d array with n >= 2, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise NonFinite("data contain non-finite values")
    mean = y.mean(axis=0)
    centred = y - mean
    scale = np.sqrt(np.mean(centred**2, axis=0))
    bad = np.flatnonzero(scale <= 1e-12 * np.maximum(1.0, np.abs(mean)))
    if bad.size:
        raise ZeroVarianceColumn(f"columns {bad.tolist()} have zero variance")
    std = Standardizer(mean, scale)
    return centred / scale, std


@dataclass(frozen=True)
class LvmConfig:
    q: int = 1
    max_iters: int = 500
    grad_tol: float = 1e-4
    seed: int = 0
    theta0: Theta = Theta(1.0, 1.0, 100.0)


@dataclass(frozen=True)
class LvmModel:
    x_latent: np.ndarray
    theta: Theta
    y_std: np.ndarray
    standardizer: Standardizer
    history: tuple
    converged: bool
    iterations: int

    @property
    def log_likelihood(self) -> float:
        return self.history[-1]


def _lvm_gram(x, theta):
    kse = _backend.se_cov_sym(x, theta.sigma, theta.length)
    k = kse.copy()
    k[np.diag_indices_from(k)] += 1.0 / theta.beta
    return kse, k


def _check(x, y_std):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y_std, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X has {x.shape[0]} rows, Y has {y.shape[0]}")
    return x, y


def lvm_log_likelihood(x, theta: Theta, y_std) -> float:
    """``sum_i -1/2 y_i^T K^-1 y_i - d/2 log|K| - n d/2 log(2 pi)`` over columns ``y_i``."""
    x, y = _check(x, y_std)
    n, d = y.shape
    _, k = _lvm_gram(x, theta)
    chol = cholesky(k)
    kinv_y = chol_solve(chol, y)
    return float(-0.5 * np.sum(y * kinv_y) - 0.5 * d * log_det(chol) - 0.5 * n * d * LOG_2PI)


def _value_and_grads(x, theta, y):
    n, d = y.shape
    kse, k = _lvm_gram(x, theta)
    chol = cholesky(k)
    kinv_y = chol_solve(chol, y)
    kinv = chol_solve(chol, np.eye(n))
    value = -0.5 * np.sum(y * kinv_y) - 0.5 * d * log_det(chol) - 0.5 * n * d * LOG_2PI
    # dL/dK, symmetric
    g = 0.5 * (kinv_y @ kinv_y.T - d * kinv)
    gk = g * kse
    inv_l2 = 1.0 / theta.length**2
    # dK_ij/dx_ik = -Kse_ij (x_ik - x_jk) / l^2; both K_ij and K_ji move
    dx = -2.0 * inv_l2 * _backend.weighted_diff_sum(x, gk)
    d2 = _backend.sq_dist(x, x)
    dtheta = np.array([
        2.0 * np.sum(gk),  # d/dlog sigma
        inv_l2 * np.sum(gk * d2),  # d/dlog l
        -np.trace(g) / theta.beta,  # d/dlog beta
    ])
    return float(value), dx, dtheta


def lvm_gradients(x, theta: Theta, y_std):
    """Gradients of :func:`lvm_log_likelihood`.

    Returns ``(dL/dX, dL/dlog(theta))`` via
    ``dL/dK = 1/2 (K^-1 Y Y^T K^-1 - d K^-1)`` chained through the kernel.
    """
    x, y = _check(x, y_std)
    _, dx, dtheta = _value_and_grads(x, theta, y)
    return dx, dtheta


def pca_init(y_std, q):
    """Scores of ``y_std`` on its top ``q`` principal directions, sign-fixed."""
    _, _, vt = np.linalg.svd(y_std, full_matrices=False)
    comps = vt[:q]
    # deterministic orientation: largest-magnitude loading positive
    signs = np.sign(comps[np.arange(q), np.argmax(np.abs(comps), axis=1)])
    return y_std @ (comps * signs[:, None]).T


def pack_state(x, theta: Theta):
    return np.concatenate([np.ravel(x), theta.log()])


def unpack_state(v, n, q):
    return v[: n * q].reshape(n, q), Theta.from_log(v[n * q:])


def fit_lvm(y_raw, config: LvmConfig = LvmConfig()) -> LvmModel:
    y_std, std = preprocess(y_raw)
    n, d = y_std.shape
    q = config.q
    if n < 3:
        raise InputError("need at least 3 observations")
    if not 1 <= q < d:
        raise InputError(f"latent dimension q={q} must satisfy 1 <= q < d={d}")

    x0 = pca_init(y_std, q)

    def fun_and_grad(v):
        if np.any(np.abs(v[n * q:]) > LOG_THETA_BOUND):
            return -math.inf, np.full(v.size, np.nan)
        x, theta = unpack_state(v, n, q)
        try:
            value, dx, dtheta = _value_and_grads(x, theta, y_std)
        except GPError:
            return -math.inf, np.full(v.size, np.nan)
        return value, np.concatenate([dx.ravel(), dtheta])

    opts = OptOptions(max_iters=config.max_iters, grad_tol=config.grad_tol, tol_x=1e-10, tol_f=1e-12, seed=config.seed)
    res = scg(fun_and_grad, pack_state(x0, config.theta0), opts)
    x, theta = unpack_state(res.x, n, q)
    _, dx, dtheta = _value_and_grads(x, theta, y_std)
    gnorm = max(np.max(np.abs(dx)), np.max(np.abs(dtheta)))
    converged = bool(gnorm <= config.grad_tol)
    return LvmModel(x, theta, y_std, std, tuple(res.trace), converged, len(res.trace) - 1)
