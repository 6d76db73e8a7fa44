"""Time the compiled chain kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--lengths 10 50 200] [--labels 3 9] [--repeat 5]

Prints one row per (kernel, L, K) with the best per-call time of each
backend and the speedup.  Results of both backends are cross-checked on
every input before timing.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from weakcrf import _pykernels

try:
    from weakcrf import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNELS = ("chain_logz", "forward_backward", "viterbi")


def _agree(a, b):
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def best_time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench(lengths, labels, repeat, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for K in labels:
        for L in lengths:
            U = rng.normal(size=(L, K))
            T = rng.normal(size=(K + 1, K))
            number = max(1, 20000 // (L * K * K))
            for name in KERNELS:
                py = getattr(_pykernels, name)
                t_py = best_time(lambda: py(U, T), repeat, number)
                if _ckernels is None:
                    rows.append((name, L, K, t_py, None))
                    continue
                cy = getattr(_ckernels, name)
                if not _agree(py(U, T), cy(U, T)):
                    raise AssertionError(f"{name} backends disagree at L={L}, K={K}")
                rows.append((name, L, K, t_py, best_time(lambda: cy(U, T), repeat, number)))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lengths", type=int, nargs="+", default=[10, 50, 200])
    p.add_argument("--labels", type=int, nargs="+", default=[3, 9])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"{'kernel':<18}{'L':>5}{'K':>4}{'numpy us':>12}{'cython us':>12}{'speedup':>9}")
    for name, L, K, t_py, t_cy in bench(args.lengths, args.labels, args.repeat):
        if t_cy is None:
            print(f"{name:<18}{L:>5}{K:>4}{t_py * 1e6:>12.1f}{'n/a':>12}{'n/a':>9}")
        else:
            print(f"{name:<18}{L:>5}{K:>4}{t_py * 1e6:>12.1f}{t_cy * 1e6:>12.1f}"
                  f"{t_py / t_cy:>8.1f}x")


if __name__ == "__main__":
    main()
