"""Exact Gaussian-process regression with a zero prior mean.

The kernel carries its own noise term, so predictions are for noisy
targets ``y*``: the predictive variance includes ``sn^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels as kern
from .errors import (
    DimensionMismatch,
    EmptyData,
    GPError,
    NonFinite,
    NonFiniteStart,
    OptimizerDiverged,
)
from .numerics import CholFactor, chol_solve, cholesky, log_det, solve_lower
from .optimize import OptOptions, nelder_mead

LOG_2PI = math.log(2.0 * math.pi)
# free hyperparameters are kept within [1e-6, 1e6]
LOG_PARAM_BOUND = math.log(1e6)


@dataclass(frozen=True)
class GprModel:
    xs: np.ndarray
    y: np.ndarray
    kernel: kern.KernelExpr
    chol: CholFactor
    alpha: np.ndarray

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    variance: np.ndarray
    cov: np.ndarray | None = None

    def band(self, multiplier=1.96):
        half = multiplier * np.sqrt(self.variance)
        return self.mean - half, self.mean + half


def _check_data(xs, y):
    x = kern.as_inputs(xs)
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0 or x.shape[0] == 0:
        raise EmptyData("no training data")
    if x.shape[0] != y.size:
        raise DimensionMismatch(f"{x.shape[0]} inputs but {y.size} targets")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFinite("training data contain non-finite values")
    return x, y


def fit(xs, y, kernel: kern.KernelExpr) -> GprModel:
    x, y = _check_data(xs, y)
    chol = cholesky(kern.gram(kernel, x))
    alpha = chol_solve(chol, y)
    x.setflags(write=False)
    y.setflags(write=False)
    alpha.setflags(write=False)
    return GprModel(x, y, kernel, chol, alpha)


def predict(model: GprModel, xs_test, full_cov: bool = False) -> Prediction:
    """Posterior mean ``K* alpha`` and variance ``K** - K* K^-1 K*^T``.

    The variance is pointwise unless ``full_cov`` is set, in which case
    the joint covariance over the test points is returned as well.
    """
    xt = kern.as_inputs(xs_test)
    if xt.shape[1] != model.xs.shape[1]:
        raise DimensionMismatch(f"test inputs have d={xt.shape[1]}, training d={model.xs.shape[1]}")
    ks = kern.cross(model.kernel, model.xs, xt)
    mean = ks @ model.alpha
    v = solve_lower(model.chol, ks.T)
    variance = kern.self_variance(model.kernel, xt) - np.einsum("ij,ij->j", v, v)
    np.maximum(variance, 0.0, out=variance)
    cov = None
    if full_cov:
        kss = kern.cross(model.kernel, xt, xt)
        kss[np.diag_indices_from(kss)] += model.kernel.noise_variance
        cov = kss - v.T @ v
    return Prediction(mean, variance, cov)


def log_marginal_likelihood(model: GprModel) -> float:
    """``-1/2 y^T K^-1 y - 1/2 log|K| - n/2 log(2 pi)``."""
    return float(-0.5 * model.y @ model.alpha - 0.5 * log_det(model.chol) - 0.5 * model.n * LOG_2PI)


def sample_prior(kernel: kern.KernelExpr, xs, rng, size=None):
    """Draw targets at ``xs`` from the zero-mean prior (noise included)."""
    chol = cholesky(kern.gram(kernel, xs))
    n = chol.n
    z = rng.standard_normal(n if size is None else (n, size))
    return chol.lower @ z


def optimize_hyperparams(xs, y, template: kern.KernelExpr, opts: OptOptions | None = None, restarts: int = 3):
    """Maximize the log marginal likelihood over the free log-parameters.

    Nelder-Mead is restarted from its best point up to ``restarts`` times
    while that still improves the objective by more than ``tol_f``.
    Returns ``(kernel, log_ml)`` for the best kernel seen.
    """
    opts = opts or OptOptions(max_evals=2000, tol_f=1e-9, tol_x=1e-7)
    x, y = _check_data(xs, y)
    if kern.n_free(template) == 0:
        raise ValueError("template has no free parameters")

    def objective(theta):
        if np.any(np.abs(theta) > LOG_PARAM_BOUND):
            return -math.inf
        try:
            k = kern.unpack(theta, template)
            return log_marginal_likelihood(fit(x, y, k))
        except GPError:
            return math.nan

    start = kern.pack(template).values
    try:
        res = nelder_mead(objective, start, opts)
    except NonFiniteStart as exc:
        raise OptimizerDiverged(f"log marginal likelihood not finite at the start: {exc}") from exc
    for _ in range(restarts):
        again = nelder_mead(objective, res.x, opts)
        improved = again.f > res.f + opts.tol_f
        if again.f >= res.f:
            res = again
        if not improved:
            break
    if not math.isfinite(res.f):
        raise OptimizerDiverged("log marginal likelihood was never finite")
    return kern.unpack(res.x, template), float(res.f)


def condition_gaussian(a_obs, a_block, b_block, c_block):
    """Condition a zero-mean joint Gaussian on its first sub-vector.

    With ``[a; b] ~ N(0, [[A, C^T], [C, B]])`` the conditional
    ``b | a`` has mean ``C A^-1 a`` and covariance ``B - C A^-1 C^T``.
    """
    a_obs = np.asarray(a_obs, dtype=float).ravel()
    A = np.atleast_2d(np.asarray(a_block, dtype=float))
    B = np.atleast_2d(np.asarray(b_block, dtype=float))
    C = np.atleast_2d(np.asarray(c_block, dtype=float))
    if A.shape[0] != a_obs.size or C.shape != (B.shape[0], A.shape[0]) or B.shape[0] != B.shape[1]:
        raise DimensionMismatch(f"blocks do not conform: A{A.shape}, B{B.shape}, C{C.shape}, a({a_obs.size})")
    chol = cholesky(A)
    mean = C @ chol_solve(chol, a_obs)
    v = solve_lower(chol, C.T)
    return mean, B - v.T @ v
