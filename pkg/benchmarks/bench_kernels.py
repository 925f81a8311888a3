"""Compare the compiled distance kernels against the pure-numpy fallback.

Run as: python3 benchmarks/bench_kernels.py [--sizes 200,500,1000] [--dims 8]
The two backends must agree numerically; this script reports wall time and the
largest absolute difference per problem size.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mlhive.kernels import _pykernels

try:
    from mlhive.kernels import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, a, b, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(a, b)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,500,1000")
    parser.add_argument("--dims", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled backend unavailable; nothing to compare")
        return 1

    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} {'kernel':>12} {'python (s)':>12} {'compiled (s)':>13} {'speedup':>8} {'max|diff|':>10}")
    for size in (int(s) for s in args.sizes.split(",")):
        a = rng.normal(size=(size, args.dims))
        b = rng.normal(size=(size // 2 + 1, args.dims))
        for name in ("pairwise_sq_euclidean", "pairwise_manhattan"):
            py_fn = getattr(_pykernels, name)
            c_fn = getattr(_ckernels, name)
            diff = float(np.max(np.abs(py_fn(a, b) - c_fn(a, b))))
            t_py = _time(py_fn, a, b)
            t_c = _time(c_fn, a, b)
            label = name.replace("pairwise_", "")
            print(
                f"{size:>6} {label:>12} {t_py:>12.6f} {t_c:>13.6f} "
                f"{t_py / t_c:>8.2f} {diff:>10.2e}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
