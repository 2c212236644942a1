# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: quaternion batch algebra, running local-linear
fits, and barycentric Lagrange evaluation.

Mirrors the contracts of ``_fallback.py``. The running fits use the same
prefix-sum formulation so both backends agree numerically.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport asin, sqrt

cnp.import_array()


def hamilton(const cnp.float64_t[:, ::1] a, const cnp.float64_t[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 4), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] o = out
    cdef Py_ssize_t i
    cdef double aw, ax, ay, az, bw, bx, by, bz
    for i in range(n):
        aw = a[i, 0]; ax = a[i, 1]; ay = a[i, 2]; az = a[i, 3]
        bw = b[i, 0]; bx = b[i, 1]; by = b[i, 2]; bz = b[i, 3]
        o[i, 0] = aw * bw - ax * bx - ay * by - az * bz
        o[i, 1] = aw * bx + ax * bw + ay * bz - az * by
        o[i, 2] = aw * by - ax * bz + ay * bw + az * bx
        o[i, 3] = aw * bz + ax * by - ay * bx + az * bw
    return out


def quat_angular_distance(const cnp.float64_t[:, ::1] a, const cnp.float64_t[:, ::1] b):
    # chord form of 2*arccos(|<a,b>|): exact zero for a == +/-b and well
    # conditioned near zero
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] o = out
    cdef Py_ssize_t i, k
    cdef double cm, cp, dm, dp, half
    for i in range(n):
        cm = 0.0
        cp = 0.0
        for k in range(4):
            dm = a[i, k] - b[i, k]
            dp = a[i, k] + b[i, k]
            cm += dm * dm
            cp += dp * dp
        half = 0.5 * sqrt(cm if cm < cp else cp)
        if half > 1.0:
            half = 1.0
        o[i] = 4.0 * asin(half)
    return out


def linear_smooth(const cnp.float64_t[::1] x, const cnp.float64_t[::1] y,
                  const cnp.int64_t[::1] windows):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fitted = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cv = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] px = np.empty(n + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] py = np.empty(n + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pxx = np.empty(n + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pxy = np.empty(n + 1, dtype=np.float64)
    cdef cnp.float64_t[::1] fv = fitted, cvv = cv
    cdef cnp.float64_t[::1] pxv = px, pyv = py, pxxv = pxx, pxyv = pxy
    cdef Py_ssize_t i, lo, hi, m
    cdef double cnt, sx, sy, sxx, sxy, xbar, ybar, sxx_c, sxy_c, slope, fit
    cdef double lev, denom

    pxv[0] = 0.0; pyv[0] = 0.0; pxxv[0] = 0.0; pxyv[0] = 0.0
    for i in range(n):
        pxv[i + 1] = pxv[i] + x[i]
        pyv[i + 1] = pyv[i] + y[i]
        pxxv[i + 1] = pxxv[i] + x[i] * x[i]
        pxyv[i + 1] = pxyv[i] + x[i] * y[i]

    for i in range(n):
        m = windows[i]
        if m < 2:
            m = 2
        if m > n:
            m = n
        lo = i - (m - 1) // 2
        if lo < 0:
            lo = 0
        hi = i + m // 2
        if hi > n - 1:
            hi = n - 1
        cnt = <double>(hi - lo + 1)
        sx = pxv[hi + 1] - pxv[lo]
        sy = pyv[hi + 1] - pyv[lo]
        sxx = pxxv[hi + 1] - pxxv[lo]
        sxy = pxyv[hi + 1] - pxyv[lo]
        xbar = sx / cnt
        ybar = sy / cnt
        sxx_c = sxx - sx * xbar
        sxy_c = sxy - sx * ybar
        if sxx_c > 0.0:
            slope = sxy_c / sxx_c
            lev = 1.0 / cnt + (x[i] - xbar) * (x[i] - xbar) / sxx_c
        else:
            slope = 0.0
            lev = 1.0 / cnt
        fit = ybar + slope * (x[i] - xbar)
        fv[i] = fit
        denom = 1.0 - lev
        if denom > 1e-10:
            cvv[i] = y[i] - (y[i] - fit) / denom
        else:
            cvv[i] = fit
    return fitted, cv


def barycentric_eval(const cnp.float64_t[::1] nodes, const cnp.float64_t[:, ::1] values,
                     const cnp.float64_t[::1] grid):
    cdef Py_ssize_t m = nodes.shape[0]
    cdef Py_ssize_t c = values.shape[1]
    cdef Py_ssize_t g = grid.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((g, c), dtype=np.float64)
    cdef cnp.float64_t[::1] wv = w
    cdef cnp.float64_t[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double prod, t, denom, kj
    cdef Py_ssize_t exact

    for j in range(m):
        prod = 1.0
        for k in range(m):
            if k != j:
                prod *= nodes[j] - nodes[k]
        wv[j] = 1.0 / prod

    for i in range(g):
        t = grid[i]
        exact = -1
        for j in range(m):
            if t == nodes[j]:
                exact = j
                break
        if exact >= 0:
            for k in range(c):
                ov[i, k] = values[exact, k]
            continue
        denom = 0.0
        for j in range(m):
            kj = wv[j] / (t - nodes[j])
            denom += kj
            for k in range(c):
                ov[i, k] += kj * values[j, k]
        for k in range(c):
            ov[i, k] /= denom
    return out
