"""Timing comparison: compiled kernel core vs NumPy fallback.

Times the batch kernels on a workload shaped like the calibrator fit
(the 41 x 41 parameter grid dominates), printing per-backend timings and
the speedup. Run as:

    python benchmarks/bench_kernels.py [--n 5000] [--k 10] [--repeats 3]
"""
import argparse
import time

import numpy as np

from encalib._kernels import _numpy as numpy_backend

try:
    from encalib._kernels import _core as core_backend
except ImportError:
    core_backend = None


def workload(n, k, seed=0):
    rng = np.random.default_rng(seed)
    Z = np.ascontiguousarray(rng.normal(0, 4, (n, k)))
    labels = rng.integers(0, k, n)
    labels[: max(1, n // 100)] = -1
    lam1 = rng.uniform(0, 0.3, n)
    lam2 = rng.uniform(0, 0.3, n)
    return Z, labels.astype(np.int64), lam1, lam2


def best_of(repeats, fn, *args):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    Z, labels, lam1, lam2 = workload(args.n, args.k)
    grid = np.linspace(0.0, 10.0, 41)
    T = np.full(args.n, 0.9)

    cases = [
        ("logsumexp_rows", lambda b: b.logsumexp_rows(Z)),
        ("softmax_rows", lambda b: b.softmax_rows(Z, 0.9)),
        ("softmax_rows_t", lambda b: b.softmax_rows_t(Z, T)),
        ("mse_loss", lambda b: b.mse_loss(Z, labels, lam1, lam2,
                                          0.9, 0.05, 2.0, 1.0)),
        ("mse_loss_grid 41x41", lambda b: b.mse_loss_grid(
            Z, labels, lam1, lam2, 0.9, 0.05, grid, grid)),
    ]

    print(f"workload: n={args.n} k={args.k}, best of {args.repeats}")
    print(f"{'kernel':<22}{'numpy':>12}{'cython':>12}{'speedup':>10}")
    for name, call in cases:
        t_np = best_of(args.repeats, call, numpy_backend)
        if core_backend is None:
            print(f"{name:<22}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
            continue
        t_cy = best_of(args.repeats, call, core_backend)
        a = call(numpy_backend)
        b = call(core_backend)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-13), f"{name} mismatch"
        print(f"{name:<22}{t_np * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms"
              f"{t_np / t_cy:>9.1f}x")
    if core_backend is None:
        print("compiled core not built; showing NumPy fallback only")


if __name__ == "__main__":
    main()
