"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from vopt import _pykernels

try:
    from vopt import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def staircase(rng, n, q):
    # points on a sphere patch form an antichain, like real bound sets
    pts = np.abs(rng.standard_normal((n, q)))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def cases(rng):
    a = staircase(rng, 2000, 3)
    b = staircase(rng, 2000, 3) + 0.01
    lower = staircase(rng, 800, 3)
    upper = staircase(rng, 800, 3) + 0.05
    n_rays, n_cons = 400, 120
    bits = rng.random((n_rays, n_cons)) < 0.3
    words = np.zeros((n_rays, 2), dtype=np.uint64)
    for k in range(n_cons):
        words[:, k // 64] |= bits[:, k].astype(np.uint64) << np.uint64(k % 64)
    plus, minus = np.arange(0, 200), np.arange(200, 400)
    return {
        "dominated_mask": (a, b),
        "widest_box": (lower, upper),
        "adjacent_pairs": (words, plus, minus, 30),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    impls = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name, _ in impls) + f"{'speedup':>10}")
    for kernel, call_args in cases(rng).items():
        times = []
        for _, mod in impls:
            fn = getattr(mod, kernel)
            times.append(min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat)))
        speedup = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else f"{'n/a':>10}"
        print(f"{kernel:<16}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + speedup)


if __name__ == "__main__":
    main()
