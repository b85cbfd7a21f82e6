import numpy as np
import pytest

from gptoolkit import parse_kernel_spec

TOY_X = np.array([-1.50, -1.00, -0.75, -0.40, -0.25, 0.00])

# reference toy-problem matrices (sf=1.27, l=1, sn=0.3)
TOY_K = np.array([
    [1.70, 1.42, 1.21, 0.87, 0.72, 0.51],
    [1.42, 1.70, 1.56, 1.34, 1.21, 0.97],
    [1.21, 1.56, 1.70, 1.51, 1.42, 1.21],
    [0.87, 1.34, 1.51, 1.70, 1.59, 1.48],
    [0.72, 1.21, 1.42, 1.59, 1.70, 1.56],
    [0.51, 0.97, 1.21, 1.48, 1.56, 1.70],
])
TOY_KSTAR = np.array([0.38, 0.79, 1.03, 1.35, 1.46, 1.58])


@pytest.fixture
def toy_kernel():
    return parse_kernel_spec("se(sf=1.27,l=1)+noise(sn=0.3!)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_spd(rng, n, cond_boost=1.0):
    m = rng.normal(size=(n, n))
    return m.T @ m + cond_boost * np.eye(n)
