"""Timing comparison of the numba kernels against their numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from tgraph._kernels import (NUMBA_ENABLED, _adamw_update_loop,
                             _adamw_update_numpy, _closest_points_loop,
                             _closest_points_numpy)

if NUMBA_ENABLED:
    from numba import njit
    closest_points_numba = njit(cache=True)(_closest_points_loop)
    adamw_update_numba = njit(cache=True)(_adamw_update_loop)


def bench(label, fn, *args, repeat=5):
    fn(*args)  # warm up (and trigger JIT compilation)
    best = min(timeit(fn, args) for _ in range(repeat))
    print(f"  {label:<22} {best * 1e3:9.3f} ms")
    return best


def timeit(fn, args):
    start = time.perf_counter()
    fn(*args)
    return time.perf_counter() - start


def bench_closest_points(n=200_000):
    rng = np.random.default_rng(0)
    oa = rng.normal(size=(n, 3))
    ob = rng.normal(size=(n, 3))
    da = rng.normal(size=(n, 3))
    da /= np.linalg.norm(da, axis=1, keepdims=True)
    db = rng.normal(size=(n, 3))
    db /= np.linalg.norm(db, axis=1, keepdims=True)
    print(f"closest_points_batch ({n} line pairs)")
    t_np = bench("numpy", _closest_points_numpy, oa, da, ob, db, 1e-8)
    if NUMBA_ENABLED:
        t_nb = bench("numba", closest_points_numba, oa, da, ob, db, 1e-8)
        print(f"  speedup numba/numpy    {t_np / t_nb:9.2f}x")


def bench_adamw(size=1_000_000, steps=5):
    rng = np.random.default_rng(1)
    def run(update):
        p = rng.normal(size=size)
        g = rng.normal(size=size)
        m = np.zeros(size)
        v = np.zeros(size)
        for step in range(1, steps + 1):
            update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.01, step)
    print(f"adamw_update ({size} parameters x {steps} steps)")
    t_np = bench("numpy", run, _adamw_update_numpy)
    if NUMBA_ENABLED:
        t_nb = bench("numba", run, adamw_update_numba)
        print(f"  speedup numba/numpy    {t_np / t_nb:9.2f}x")


if __name__ == "__main__":
    if not NUMBA_ENABLED:
        print("TGRAPH_NUMBA=0: numba path disabled, timing numpy only")
    bench_closest_points()
    bench_adamw()
