"""Time the compiled kernel loops against the NumPy fallback.

    python3 benchmarks/bench_backends.py [--sizes 100 400 1000] [--repeat 5]

Prints one row per (function, n) with the best wall time of each backend
and the speed-up.  Results are also checked for agreement.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from gptoolkit import _backend


def cases(n, rng):
    x = np.ascontiguousarray(rng.normal(size=(n, 2)))
    x1 = np.ascontiguousarray(x[:, 0])
    w = rng.normal(size=(n, n))
    w = np.ascontiguousarray(w + w.T)
    return {
        "sq_dist": (x, x),
        "se_cov": (x, x, 1.3, 0.7),
        "se_cov_sym": (x, 1.3, 0.7),
        "periodic_cov": (x1, x1, 0.4),
        "weighted_diff_sum": (x, w),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1000])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    backends = _backend.available()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
        return 1
    fast, ref = backends["cython"], backends["numpy"]
    rng = np.random.default_rng(0)
    print(f"{'function':<18} {'n':>6} {'cython ms':>10} {'numpy ms':>10} {'speed-up':>9}")
    for n in args.sizes:
        for name, call_args in cases(n, rng).items():
            f, g = getattr(fast, name), getattr(ref, name)
            np.testing.assert_allclose(f(*call_args), g(*call_args), rtol=1e-10, atol=1e-10)
            number = max(1, int(2e6 // (n * n)))
            tf = min(timeit.repeat(lambda: f(*call_args), number=number, repeat=args.repeat)) / number
            tg = min(timeit.repeat(lambda: g(*call_args), number=number, repeat=args.repeat)) / number
            print(f"{name:<18} {n:>6} {tf * 1e3:>10.3f} {tg * 1e3:>10.3f} {tg / tf:>8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
