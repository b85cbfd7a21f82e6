"""Pick the compiled kernel loops if they were built, else the NumPy ones.

Set ``GPTOOLKIT_PURE_PYTHON=1`` before import to force the fallback.
"""

import os

import numpy as np

from . import _pure

if os.environ.get("GPTOOLKIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pure
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _pure

BACKEND = _impl.NAME


def available():
    """Map of backend name -> module for every importable implementation."""
    found = {_pure.NAME: _pure}
    try:
        from . import _core

        found[_core.NAME] = _core
    except ImportError:
        pass
    return found


def _mat(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def _vec(x):
    return np.ascontiguousarray(np.ravel(x), dtype=np.float64)


def sq_dist(x1, x2):
    return _impl.sq_dist(_mat(x1), _mat(x2))


def se_cov(x1, x2, sigma_f, length):
    return _impl.se_cov(_mat(x1), _mat(x2), float(sigma_f), float(length))


def se_cov_sym(x, sigma_f, length):
    return _impl.se_cov_sym(_mat(x), float(sigma_f), float(length))


def periodic_cov(x1, x2, nu):
    return _impl.periodic_cov(_vec(x1), _vec(x2), float(nu))


def weighted_diff_sum(x, w):
    # rewritten as x * rowsum(w) - w @ x this is one BLAS product, which beats
    # the compiled double loop at every size measured (benchmarks/), so both
    # backends use it
    return _pure.weighted_diff_sum(_mat(x), _mat(w))
