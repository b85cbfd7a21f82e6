"""Maximizers: Nelder-Mead simplex (derivative free) and Moller's scaled
conjugate gradients.

Both take an objective to MAXIMIZE.  Internally they minimize its
negation.  Neither uses randomness; identical inputs give identical
iterates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GradientMismatch, NonFiniteStart
from .numerics import fd_gradient

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptOptions:
    max_evals: int = 2000
    tol_f: float = 1e-10
    tol_x: float = 1e-8
    reflect: float = 1.0
    expand: float = 2.0
    contract: float = 0.5
    shrink: float = 0.5
    scg_sigma0: float = 1e-4
    max_iters: int = 1000
    grad_tol: float = 1e-6
    check_gradient: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.tol_f <= 0 or self.tol_x <= 0 or self.grad_tol < 0:
            raise ValueError("tolerances must be positive")
        if not (self.reflect > 0 and self.expand > max(1.0, self.reflect)):
            raise ValueError("need reflect > 0 and expand > max(1, reflect)")
        if not (0 < self.contract < 1 and 0 < self.shrink < 1):
            raise ValueError("contract and shrink must lie in (0, 1)")


class NelderMeadResult(NamedTuple):
    x: np.ndarray
    f: float
    evals: int


class SCGResult(NamedTuple):
    x: np.ndarray
    f: float
    trace: list


def nelder_mead(objective, x0, opts: OptOptions = OptOptions()) -> NelderMeadResult:
    """Maximize ``objective`` with the Nelder-Mead simplex method.

    The initial simplex is ``x0`` plus one vertex per coordinate, offset by
    ``0.1 * max(1, |x0_i|)``.  NaN objective values count as ``-inf``, so
    the simplex simply retreats from invalid regions.  Stops when both the
    spread of objective values over the simplex is below ``tol_f`` and the
    largest vertex distance from the best vertex is below ``tol_x``, or
    after ``max_evals`` evaluations.
    """
    x0 = np.array(x0, dtype=float).ravel()
    n = x0.size
    evals = 0

    def cost(x):
        nonlocal evals
        evals += 1
        v = float(objective(x))
        return -v if not math.isnan(v) else math.inf

    f0 = cost(x0)
    if not math.isfinite(f0):
        raise NonFiniteStart(f"objective is not finite at the start point {x0}")
    if n == 0:
        return NelderMeadResult(x0, -f0, evals)

    simplex = np.empty((n + 1, n))
    fvals = np.empty(n + 1)
    simplex[0], fvals[0] = x0, f0
    for i in range(n):
        v = x0.copy()
        v[i] += 0.1 * max(1.0, abs(x0[i]))
        simplex[i + 1] = v
        fvals[i + 1] = cost(v)

    while evals < opts.max_evals:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        spread_f = fvals[-1] - fvals[0]
        spread_x = np.max(np.abs(simplex[1:] - simplex[0]))
        if spread_f < opts.tol_f and spread_x < opts.tol_x:
            break

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + opts.reflect * (centroid - worst)
        fr = cost(xr)
        if fr < fvals[0]:
            xe = centroid + opts.expand * (xr - centroid)
            fe = cost(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + opts.contract * (xr - centroid)
            fc = cost(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + opts.contract * (worst - centroid)
            fc = cost(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        best = simplex[0]
        for i in range(1, n + 1):
            simplex[i] = best + opts.shrink * (simplex[i] - best)
            fvals[i] = cost(simplex[i])

    i = int(np.argmin(fvals))
    if evals >= opts.max_evals:
        log.debug("nelder_mead stopped at max_evals=%d", opts.max_evals)
    return NelderMeadResult(simplex[i].copy(), -float(fvals[i]), evals)


def scg(fun_and_grad, x0, opts: OptOptions = OptOptions()) -> SCGResult:
    """Maximize with scaled conjugate gradients (Moller, 1993).

    ``fun_and_grad(x)`` returns ``(value, gradient)`` of the objective to
    maximize.  The minimization below works on ``E = -value``.

    Update rules, per iteration with search direction ``d`` and gradient
    ``g`` of ``E``:

    * when the previous step succeeded, estimate the curvature along ``d``
      by a finite difference of gradients:
      ``gamma = d.(g(x + s d) - g(x)) / s`` with ``s = sigma0 / |d|``;
    * ``delta = gamma + lam |d|^2``; if ``delta <= 0`` the Hessian is
      made positive along ``d`` with ``delta = lam |d|^2`` and
      ``lam -= gamma / |d|^2``;
    * step ``alpha = -(d.g) / delta``; comparison ratio
      ``Delta = 2 (E(x + alpha d) - E(x)) / (alpha d.g)``;
    * the step is accepted iff ``Delta >= 0`` (E did not increase);
    * ``lam`` is multiplied by 4 if ``Delta < 0.25`` and halved if
      ``Delta > 0.75`` (clamped to [1e-15, 1e100]);
    * after ``dim(x)`` accepted steps, or whenever ``d`` stops being a
      descent direction, ``d`` is reset to ``-g``; otherwise
      ``d = beta d - g`` with the Polak-Ribiere style
      ``beta = (g_old - g).g / (d.g_old)``.

    The returned trace holds the objective at x0 and after every accepted
    step, so it is non-decreasing.
    """
    x = np.array(x0, dtype=float).ravel()
    nparams = x.size

    def energy(z):
        f, g = fun_and_grad(z)
        return -float(f), -np.asarray(g, dtype=float).ravel()

    fold, gradnew = energy(x)
    if not (math.isfinite(fold) and np.all(np.isfinite(gradnew))):
        raise NonFiniteStart("objective or gradient is not finite at the start point")
    if opts.check_gradient:
        fd = fd_gradient(lambda z: energy(z)[0], x)
        scale = np.maximum(np.abs(fd), 1.0)
        if np.max(np.abs(fd - gradnew) / scale) > 1e-4:
            raise GradientMismatch("analytic gradient disagrees with finite differences at x0")

    trace = [-fold]
    if nparams == 0:
        return SCGResult(x, -fold, trace)

    sigma0 = opts.scg_sigma0
    lam, lam_min, lam_max = 1.0, 1e-15, 1e100
    gradold = gradnew
    d = -gradnew
    success = True
    nsuccess = 0
    mu = kappa = gamma = 0.0

    for _ in range(opts.max_iters):
        if np.max(np.abs(gradnew)) <= opts.grad_tol:
            break
        if success:
            mu = float(d @ gradnew)
            if mu >= 0:
                d = -gradnew
                mu = float(d @ gradnew)
            kappa = float(d @ d)
            if kappa < np.finfo(float).eps:
                break
            sigma = sigma0 / math.sqrt(kappa)
            _, gplus = energy(x + sigma * d)
            gamma = float(d @ (gplus - gradnew)) / sigma
            if not math.isfinite(gamma):
                gamma = 0.0

        delta = gamma + lam * kappa
        if delta <= 0:
            delta = lam * kappa
            lam = lam - gamma / kappa
        alpha = -mu / delta

        xnew = x + alpha * d
        fnew, gnew_candidate = energy(xnew)
        if math.isfinite(fnew) and np.all(np.isfinite(gnew_candidate)):
            ratio = 2.0 * (fnew - fold) / (alpha * mu)
        else:
            ratio = -1.0

        if ratio >= 0:
            success = True
            nsuccess += 1
            step = np.max(np.abs(alpha * d))
            fchange = abs(fnew - fold)
            x = xnew
            fold = fnew
            gradold, gradnew = gradnew, gnew_candidate
            trace.append(-fnew)
            if step < opts.tol_x and fchange < opts.tol_f:
                break
        else:
            success = False

        if ratio < 0.25:
            lam = min(4.0 * lam, lam_max)
        if ratio > 0.75:
            lam = max(0.5 * lam, lam_min)
        if lam >= lam_max:
            break

        if nsuccess == nparams:
            d = -gradnew
            nsuccess = 0
        elif success:
            beta = float((gradold - gradnew) @ gradnew) / mu
            d = beta * d - gradnew

    return SCGResult(x, -fold, trace)
