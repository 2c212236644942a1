#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Run after installing the package:

    python3 benchmarks/bench_kernels.py

Workloads mirror the hot paths: quaternion products and distances over
variant-set-sized batches, running linear fits at smoother window sizes,
and barycentric evaluation at interpolation-piece sizes.
"""

import time

import numpy as np

from skelmotion import kernels


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    try:
        native = kernels.get_backend("native")
    except ImportError:
        print("native backend not built; nothing to compare")
        return
    fallback = kernels.get_backend("numpy")

    q = rng.normal(size=(200_000, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    p = np.roll(q, 1, axis=0).copy()

    n = 5000
    x = np.sort(rng.uniform(0, 100, n))
    y = np.sin(x / 3.0) + rng.normal(0, 0.1, n)
    windows = np.full(n, 250, dtype=np.int64)

    nodes = np.arange(6.0)
    values = rng.normal(size=(6, 212))
    grid = np.linspace(0.0, 5.0, 4000)

    cases = [
        ("hamilton 200k", lambda b: b.hamilton(q, p)),
        ("angular_distance 200k", lambda b: b.quat_angular_distance(q, p)),
        ("linear_smooth n=5000 w=250", lambda b: b.linear_smooth(x, y, windows)),
        ("barycentric 6x212 -> 4000", lambda b: b.barycentric_eval(nodes, values, grid)),
    ]

    print(f"{'case':<30}{'numpy':>12}{'native':>12}{'speedup':>10}")
    for name, fn in cases:
        t_np = timeit(fn, fallback)
        t_nat = timeit(fn, native)
        print(f"{name:<30}{t_np * 1e3:>10.2f}ms{t_nat * 1e3:>10.2f}ms"
              f"{t_np / t_nat:>9.2f}x")

    a = np.asarray(fallback.hamilton(q, p))
    b = np.asarray(native.hamilton(q, p))
    print("\nmax |numpy - native| (hamilton):", np.abs(a - b).max())


if __name__ == "__main__":
    main()
