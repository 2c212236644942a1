"""NumPy implementations of the hot kernels.

Same contracts as the compiled module in ``_native.pyx``; both backends use
prefix sums for the running fits so results agree to the last bit on the
same input.
"""

import numpy as np


def hamilton(a, b):
    """Hamilton product of quaternion arrays, wxyz layout, broadcastable."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    out = np.empty(np.broadcast(a, b).shape, dtype=np.float64)
    out[..., 0] = aw * bw - ax * bx - ay * by - az * bz
    out[..., 1] = aw * bx + ax * bw + ay * bz - az * by
    out[..., 2] = aw * by - ax * bz + ay * bw + az * bx
    out[..., 3] = aw * bz + ax * by - ay * bx + az * bw
    return out


def quat_angular_distance(a, b):
    """2*arccos(|<a, b>|) per quaternion pair; range [0, pi].

    Evaluated through the 4D chord, ``4*arcsin(min(|a-b|, |a+b|)/2)``,
    which is the same quantity but exactly zero for a == +/-b and well
    conditioned near zero, where arccos loses half the significant digits.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cm = ((a - b) ** 2).sum(axis=-1)
    cp = ((a + b) ** 2).sum(axis=-1)
    half = 0.5 * np.sqrt(np.minimum(cm, cp))
    return 4.0 * np.arcsin(np.clip(half, 0.0, 1.0))


def linear_smooth(x, y, windows):
    """Running local linear fit with truncated nearest-neighbour windows.

    Parameters
    ----------
    x : (n,) strictly increasing abscissae
    y : (n,) values
    windows : (n,) int64 target window sizes (points); truncated at the ends

    Returns
    -------
    (fitted, cv) : each (n,) float64. ``cv`` holds leave-one-out fitted
    values computed from the hat-matrix leverage; where the leverage is
    degenerate (two-point boundary windows) the plain fit is used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    windows = np.asarray(windows, dtype=np.int64)
    n = x.shape[0]
    idx = np.arange(n)
    m = np.clip(windows, 2, n)
    lo = np.maximum(0, idx - (m - 1) // 2)
    hi = np.minimum(n - 1, idx + m // 2)

    px = np.concatenate(([0.0], np.cumsum(x)))
    py = np.concatenate(([0.0], np.cumsum(y)))
    pxx = np.concatenate(([0.0], np.cumsum(x * x)))
    pxy = np.concatenate(([0.0], np.cumsum(x * y)))

    cnt = (hi - lo + 1).astype(np.float64)
    sx = px[hi + 1] - px[lo]
    sy = py[hi + 1] - py[lo]
    sxx = pxx[hi + 1] - pxx[lo]
    sxy = pxy[hi + 1] - pxy[lo]

    xbar = sx / cnt
    ybar = sy / cnt
    sxx_c = sxx - sx * xbar
    sxy_c = sxy - sx * ybar
    safe = sxx_c > 0.0
    slope = np.where(safe, sxy_c / np.where(safe, sxx_c, 1.0), 0.0)
    fitted = ybar + slope * (x - xbar)

    lev = 1.0 / cnt + np.where(safe, (x - xbar) ** 2 / np.where(safe, sxx_c, 1.0), 0.0)
    denom = 1.0 - lev
    ok = denom > 1e-10
    cv = np.where(ok, y - (y - fitted) / np.where(ok, denom, 1.0), fitted)
    return fitted, cv


def barycentric_eval(nodes, values, grid):
    """Evaluate the Lagrange interpolant through (nodes, values) at grid.

    nodes : (m,) distinct abscissae
    values : (m, c) channel values at the nodes
    grid : (g,) evaluation points; points equal to a node copy its value
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)

    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / diff.prod(axis=1)

    d = grid[:, None] - nodes[None, :]
    exact = d == 0.0
    d_safe = np.where(exact, 1.0, d)
    k = w[None, :] / d_safe
    k[exact.any(axis=1)] = 0.0
    k[exact] = 1.0
    denom = k.sum(axis=1)
    return (k @ values) / denom[:, None]
