"""Time the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 500 2000] [--repeat 5] [--threads 1 4]
"""
import argparse
import os
import time

import numpy as np

from splinestab import _backend, _pycore

try:
    from splinestab import _core
except ImportError:
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n, d, rng):
    X = rng.uniform(-1, 1, (n, d))
    Y = rng.uniform(-1, 1, (n // 2, d))
    coef = rng.normal(size=len(Y))
    V = rng.normal(size=(n, len(Y)))
    rho = rng.uniform(0.05, 0.5, n)
    mask = np.ones(len(Y), dtype=bool)
    power, use_log = (2, True) if d == 2 else (3, False)
    return {
        "kernel_matrix": lambda impl: _backend.kernel_matrix(X, Y, power, use_log, impl=impl),
        "kernel_apply": lambda impl: _backend.kernel_apply(X, Y, power, use_log, coef, impl=impl),
        "weighted_abs_sums": lambda impl: _backend.weighted_abs_sums(V, X, Y, rho, 1.0, mask,
                                                                     impl=impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 4000])
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, os.cpu_count() or 1])
    args = ap.parse_args()
    if _core is None:
        raise SystemExit("compiled core not built; run `pip install -e .` first")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'d':>2} {'n':>6} {'threads':>7} {'python s':>10} {'compiled s':>11} "
          f"{'speedup':>8} {'max rel diff':>13}")
    for d in args.dims:
        for n in args.sizes:
            for name, run in cases(n, d, rng).items():
                t_py, ref = best_of(lambda: run(_pycore), args.repeat)
                for threads in args.threads:
                    os.environ["SPLINESTAB_THREADS"] = str(threads)
                    t_c, out = best_of(lambda: run(_core), args.repeat)
                    diff = float(np.max(np.abs(out - ref) / np.maximum(np.abs(ref), 1e-300)))
                    print(f"{name:<18} {d:>2} {n:>6} {threads:>7} {t_py:>10.4f} {t_c:>11.4f} "
                          f"{t_py / t_c:>8.1f} {diff:>13.2e}")


if __name__ == "__main__":
    main()
