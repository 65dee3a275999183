"""Benchmark the compiled kernels against the pure-NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats 5]

Times the two hot loops on a grid of problem sizes and prints a speedup
table. The compiled extension must be built (pip install -e . or
python setup.py build_ext --inplace); otherwise only the fallback runs.
"""

import argparse
import time

import numpy as np

from ssdl import _kernels_py

try:
    from ssdl import _kernels_c
except ImportError:
    _kernels_c = None


def time_call(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_cd(repeats):
    print("coordinate-descent sweep (K atoms x N samples, 5 sweeps)")
    print(f"{'K':>5} {'N':>6} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for k, n in [(20, 100), (50, 500), (100, 1000), (200, 2000)]:
        rng = np.random.default_rng(0)
        d = rng.standard_normal((k // 2 + 1, k))
        gram = np.ascontiguousarray(d.T @ d + 0.5 * np.eye(k))
        target = np.ascontiguousarray(rng.standard_normal((k, n)))

        def run(impl):
            codes = np.zeros((k, n))
            impl.cd_sweep(gram, target, codes, 0.01, 5)

        t_py = time_call(run, _kernels_py, repeats=repeats)
        if _kernels_c is None:
            print(f"{k:>5} {n:>6} {t_py * 1e3:>9.2f}ms {'-':>10} {'-':>8}")
        else:
            t_c = time_call(run, _kernels_c, repeats=repeats)
            print(
                f"{k:>5} {n:>6} {t_py * 1e3:>9.2f}ms {t_c * 1e3:>9.2f}ms "
                f"{t_py / t_c:>7.1f}x"
            )


def bench_plap(repeats):
    print("\np-Laplacian gradient (E edges, M dims, p=2.2)")
    print(f"{'E':>5} {'M':>6} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for e, m in [(50, 50), (100, 100), (150, 150), (200, 100)]:
        rng = np.random.default_rng(1)
        w = rng.random((e, e)) * (rng.random((e, e)) < 0.3)
        w = np.ascontiguousarray((w + w.T) / 2.0)
        np.fill_diagonal(w, 0.0)
        qt = np.ascontiguousarray(np.linalg.qr(rng.standard_normal((e, m)))[0].T)

        t_py = time_call(_kernels_py.plap_gradient, w, qt, 2.2, repeats=repeats)
        if _kernels_c is None:
            print(f"{e:>5} {m:>6} {t_py * 1e3:>9.2f}ms {'-':>10} {'-':>8}")
        else:
            t_c = time_call(_kernels_c.plap_gradient, w, qt, 2.2, repeats=repeats)
            print(
                f"{e:>5} {m:>6} {t_py * 1e3:>9.2f}ms {t_c * 1e3:>9.2f}ms "
                f"{t_py / t_c:>7.1f}x"
            )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if _kernels_c is None:
        print("compiled kernels not available; timing the fallback only\n")
    bench_cd(args.repeats)
    bench_plap(args.repeats)


if __name__ == "__main__":
    main()
