# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise loops for covariance construction and the GP-LVM
latent gradient.  Mirrors ``_pure`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sin, M_PI

cnp.import_array()

NAME = "cython"


def sq_dist(const double[:, ::1] x1, const double[:, ::1] x2):
    cdef Py_ssize_t n = x1.shape[0], m = x2.shape[0], d = x1.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = x1[i, k] - x2[j, k]
                acc += diff * diff
            o[i, j] = acc
    return out


def se_cov(const double[:, ::1] x1, const double[:, ::1] x2, double sigma_f, double length):
    cdef Py_ssize_t n = x1.shape[0], m = x2.shape[0], d = x1.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    cdef double amp = sigma_f * sigma_f
    cdef double inv2l2 = 1.0 / (2.0 * length * length)
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = x1[i, k] - x2[j, k]
                acc += diff * diff
            o[i, j] = amp * exp(-acc * inv2l2)
    return out


def se_cov_sym(const double[:, ::1] x, double sigma_f, double length):
    """Symmetric Gram block; fills the upper triangle and mirrors it."""
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, v
    cdef double amp = sigma_f * sigma_f
    cdef double inv2l2 = 1.0 / (2.0 * length * length)
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        o[i, i] = amp
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = x[i, k] - x[j, k]
                acc += diff * diff
            v = amp * exp(-acc * inv2l2)
            o[i, j] = v
            o[j, i] = v
    return out


def periodic_cov(const double[::1] x1, const double[::1] x2, double nu):
    cdef Py_ssize_t n = x1.shape[0], m = x2.shape[0]
    cdef Py_ssize_t i, j
    cdef double s
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            s = sin(nu * M_PI * (x1[i] - x2[j]))
            o[i, j] = exp(-2.0 * s * s)
    return out


def weighted_diff_sum(const double[:, ::1] x, const double[:, ::1] w):
    """out[i, k] = sum_j w[i, j] * (x[i, k] - x[j, k]).

    Accumulates each output row in a small buffer so the inner loop only
    streams one row of ``w`` and the rows of ``x``.
    """
    cdef Py_ssize_t n = x.shape[0], q = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double wij
    out = np.empty((n, q), dtype=np.float64)
    acc_arr = np.empty(q, dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] acc = acc_arr
    for i in range(n):
        for k in range(q):
            acc[k] = 0.0
        for j in range(n):
            wij = w[i, j]
            for k in range(q):
                acc[k] += wij * (x[i, k] - x[j, k])
        for k in range(q):
            o[i, k] = acc[k]
    return out
