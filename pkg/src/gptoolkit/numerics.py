"""Dense linear-algebra helpers: jittered Cholesky, solves, log-determinants
and a central-difference gradient.

Every ``K^{-1}`` product in the package goes through :func:`chol_solve`;
no explicit inverse is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NonFinite, NotPositiveDefinite, NotSymmetric

# relative jitter levels tried after a plain factorization fails
JITTER_SCHEDULE = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor plus the absolute diagonal jitter that was needed."""

    lower: np.ndarray
    jitter_applied: float = 0.0

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def cholesky(a, jitter_schedule=JITTER_SCHEDULE) -> CholFactor:
    """Factorize a symmetric matrix, escalating diagonal jitter on failure.

    Jitter is ``eps * mean(diag(a))`` for each ``eps`` in
    ``jitter_schedule``; the amount that succeeded is recorded on the
    returned factor.

    Raises
    ------
    NonFinite
        If ``a`` contains NaN or inf.
    NotSymmetric
        If ``a`` is not square or deviates from symmetry by more than
        1e-12 relative to its largest entry.
    NotPositiveDefinite
        If the largest jitter level still fails.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise NotSymmetric(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains non-finite entries")
    scale = max(np.max(np.abs(a)), 1e-300)
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric")
    try:
        return CholFactor(np.linalg.cholesky(a), 0.0)
    except np.linalg.LinAlgError:
        pass
    mean_diag = float(np.mean(np.diag(a)))
    if mean_diag > 0:
        eye = np.eye(a.shape[0])
        for eps in jitter_schedule:
            jitter = eps * mean_diag
            try:
                return CholFactor(np.linalg.cholesky(a + jitter * eye), jitter)
            except np.linalg.LinAlgError:
                continue
    raise NotPositiveDefinite(
        f"matrix not positive definite after jitter up to {jitter_schedule[-1]:g} * mean(diag)"
    )


def chol_solve(f: CholFactor, b):
    """Solve ``(L L^T) x = b`` with two triangular solves."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"factor is {f.n}x{f.n} but right-hand side has {b.shape[0]} rows")
    z = solve_triangular(f.lower, b, lower=True, check_finite=False)
    return solve_triangular(f.lower.T, z, lower=False, check_finite=False)


def solve_lower(f: CholFactor, b):
    """``L^{-1} b`` (forward substitution only)."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"factor is {f.n}x{f.n} but right-hand side has {b.shape[0]} rows")
    return solve_triangular(f.lower, b, lower=True, check_finite=False)


def log_det(f: CholFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def fd_gradient(f, x, h=None):
    """Central-difference gradient of scalar ``f`` at ``x``.

    The default step per coordinate is ``1e-5 * max(1, |x_i|)``; a
    scalar ``h`` overrides it for all coordinates.
    """
    x = np.array(x, dtype=float).ravel()
    if h is None:
        steps = 1e-5 * np.maximum(1.0, np.abs(x))
    else:
        steps = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += steps[i]
        xm[i] -= steps[i]
        fp, fm = float(f(xp)), float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFinite(f"objective not finite around coordinate {i}")
        g[i] = (fp - fm) / (xp[i] - xm[i])
    return g
