"""NumPy implementations of the compiled loops in ``_core.pyx``.

Used when the extension is not built or when ``GPTOOLKIT_PURE_PYTHON``
is set.  Inputs are C-contiguous float64 arrays (the dispatcher in
``_backend`` guarantees this).
"""

import numpy as np

NAME = "numpy"


def sq_dist(x1, x2):
    diff = x1[:, None, :] - x2[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def se_cov(x1, x2, sigma_f, length):
    return sigma_f * sigma_f * np.exp(-sq_dist(x1, x2) / (2.0 * length * length))


def se_cov_sym(x, sigma_f, length):
    out = se_cov(x, x, sigma_f, length)
    # exact symmetry and exact diagonal, as in the compiled version
    out = np.triu(out, 1)
    out = out + out.T
    np.fill_diagonal(out, sigma_f * sigma_f)
    return out


def periodic_cov(x1, x2, nu):
    s = np.sin(nu * np.pi * (x1[:, None] - x2[None, :]))
    return np.exp(-2.0 * s * s)


def weighted_diff_sum(x, w):
    return x * w.sum(axis=1)[:, None] - w @ x
