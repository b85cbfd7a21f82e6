"""Regenerate the synthetic CSV files in this directory.

    python data/generate.py
"""

from pathlib import Path

import numpy as np

from gptoolkit import gpr, parse_kernel_spec
from gptoolkit.data import write_csv

HERE = Path(__file__).parent
TOY_X = np.array([-1.50, -1.00, -0.75, -0.40, -0.25, 0.00])


def two_curves():
    s = np.linspace(0.0, 1.0, 9)
    left = np.c_[-1.0 - 0.3 * np.cos(3 * s), 2 * s - 1]
    right = np.c_[1.0 + 0.3 * np.cos(3 * s[:8]), 2 * s[:8] - 1]
    return np.vstack([left, right])


def main():
    # toy regression inputs with targets drawn from the prior (the targets are synthetic)
    k = parse_kernel_spec("se(sf=1.27,l=1)+noise(sn=0.3)")
    y = gpr.sample_prior(k, TOY_X, np.random.default_rng(3))
    write_csv(HERE / "toy_regression.csv", ["x", "y"], [TOY_X, y])

    rng = np.random.default_rng(0)
    x = np.sort(np.r_[rng.uniform(-2.0, -0.3, 5), rng.uniform(0.3, 2.0, 5)])
    write_csv(HERE / "classify_binary.csv", ["x", "label"], [x, np.where(x > 0, 1.0, -1.0)])

    x3 = np.r_[rng.uniform(-3, -1.2, 8), rng.uniform(-0.8, 0.8, 8), rng.uniform(1.2, 3, 8)]
    write_csv(HERE / "classify_3class.csv", ["x", "label"], [x3, np.repeat([0.0, 1.0, 2.0], 8)])

    y2 = two_curves()
    write_csv(HERE / "two_curves.csv", ["y1", "y2"], list(y2.T))

    centres = 5.0 * np.eye(4)[:3]
    rng = np.random.default_rng(0)
    yc = np.vstack([c + rng.normal(size=(10, 4)) for c in centres])
    write_csv(HERE / "clusters.csv", ["y1", "y2", "y3", "y4", "label"], [*yc.T, np.repeat([0.0, 1.0, 2.0], 10)])


if __name__ == "__main__":
    main()
