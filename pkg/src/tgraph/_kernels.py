"""Hot numeric kernels with optional numba acceleration.

Every kernel has a pure-numpy implementation. Setting the environment
variable TGRAPH_NUMBA=0 before import selects the numpy path; anything
else (including unset) uses @njit-compiled versions. The two paths are
checked against each other in the test suite and timed against each
other in benchmarks/bench_kernels.py.
"""
import os

import numpy as np

NUMBA_ENABLED = os.environ.get("TGRAPH_NUMBA", "1") != "0"


# ---------------------------------------------------------------------------
# closest point between pairs of infinite lines
# ---------------------------------------------------------------------------

def _closest_points_numpy(origins_a, dirs_a, origins_b, dirs_b, eps_par):
    n = origins_a.shape[0]
    points = np.empty((n, 3))
    gaps = np.empty(n)
    degenerate = np.empty(n, dtype=np.bool_)

    b = np.sum(dirs_a * dirs_b, axis=1)
    degenerate[:] = np.abs(1.0 - np.abs(b)) < eps_par
    w = origins_a - origins_b
    d = np.sum(dirs_a * w, axis=1)
    e = np.sum(dirs_b * w, axis=1)
    denom = 1.0 - b * b
    denom = np.where(degenerate, 1.0, denom)
    s = (b * e - d) / denom
    u = (e - b * d) / denom
    p = origins_a + s[:, None] * dirs_a
    q = origins_b + u[:, None] * dirs_b
    points[:] = 0.5 * (p + q)
    gaps[:] = np.linalg.norm(p - q, axis=1)
    points[degenerate] = np.nan
    gaps[degenerate] = np.nan
    return points, gaps, degenerate


def _closest_points_loop(origins_a, dirs_a, origins_b, dirs_b, eps_par):
    n = origins_a.shape[0]
    points = np.empty((n, 3))
    gaps = np.empty(n)
    degenerate = np.empty(n, dtype=np.bool_)
    for i in range(n):
        b = 0.0
        d = 0.0
        e = 0.0
        for k in range(3):
            w = origins_a[i, k] - origins_b[i, k]
            b += dirs_a[i, k] * dirs_b[i, k]
            d += dirs_a[i, k] * w
            e += dirs_b[i, k] * w
        if abs(1.0 - abs(b)) < eps_par:
            degenerate[i] = True
            for k in range(3):
                points[i, k] = np.nan
            gaps[i] = np.nan
            continue
        degenerate[i] = False
        denom = 1.0 - b * b
        s = (b * e - d) / denom
        u = (e - b * d) / denom
        g = 0.0
        for k in range(3):
            p = origins_a[i, k] + s * dirs_a[i, k]
            q = origins_b[i, k] + u * dirs_b[i, k]
            points[i, k] = 0.5 * (p + q)
            g += (p - q) * (p - q)
        gaps[i] = np.sqrt(g)
    return points, gaps, degenerate


# ---------------------------------------------------------------------------
# fused AdamW parameter update (flat views)
# ---------------------------------------------------------------------------

def _adamw_update_numpy(p, g, m, v, lr, beta1, beta2, eps, weight_decay, step):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    p -= lr * ((m / bc1) / (np.sqrt(v / bc2) + eps) + weight_decay * p)


def _adamw_update_loop(p, g, m, v, lr, beta1, beta2, eps, weight_decay, step):
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    for i in range(p.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        mhat = m[i] / bc1
        vhat = v[i] / bc2
        p[i] -= lr * (mhat / (np.sqrt(vhat) + eps) + weight_decay * p[i])


if NUMBA_ENABLED:
    from numba import njit

    closest_points_batch = njit(cache=True)(_closest_points_loop)
    adamw_update = njit(cache=True)(_adamw_update_loop)
else:
    closest_points_batch = _closest_points_numpy
    adamw_update = _adamw_update_numpy
