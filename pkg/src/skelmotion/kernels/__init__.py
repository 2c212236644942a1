"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the NumPy
implementations are used. Set ``SKELMOTION_KERNELS=numpy`` or ``=native``
to force a backend (forcing ``native`` raises if the extension is absent).

Public functions normalise shapes here so both backends see contiguous
float64 input:

- ``hamilton(a, b)``: quaternion product, wxyz, broadcastable ``(..., 4)``
- ``quat_angular_distance(a, b)``: ``2*arccos(|<a,b>|)``, shape ``(...,)``
- ``linear_smooth(x, y, windows)``: running local-linear fit + LOO values
- ``barycentric_eval(nodes, values, grid)``: Lagrange interpolant values
"""

import os

import numpy as np

from . import _fallback

_forced = os.environ.get("SKELMOTION_KERNELS", "").strip().lower()

if _forced == "numpy":
    _impl = _fallback
    BACKEND = "numpy"
elif _forced == "native":
    from . import _native as _impl  # raises ImportError if not built

    BACKEND = "native"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = _fallback
        BACKEND = "numpy"


def get_backend(name=None):
    """Return the backend module ('native'/'numpy'); default is the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _fallback
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown kernel backend {name!r}")


def _pair_flat(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    shape = np.broadcast_shapes(a.shape, b.shape)
    a = np.ascontiguousarray(np.broadcast_to(a, shape)).reshape(-1, 4)
    b = np.ascontiguousarray(np.broadcast_to(b, shape)).reshape(-1, 4)
    return a, b, shape


def hamilton(a, b):
    a2, b2, shape = _pair_flat(a, b)
    return np.asarray(_impl.hamilton(a2, b2)).reshape(shape)


def quat_angular_distance(a, b):
    a2, b2, shape = _pair_flat(a, b)
    return np.asarray(_impl.quat_angular_distance(a2, b2)).reshape(shape[:-1])


def linear_smooth(x, y, windows):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if np.isscalar(windows) or getattr(windows, "ndim", 1) == 0:
        windows = np.full(x.shape[0], int(windows), dtype=np.int64)
    windows = np.ascontiguousarray(windows, dtype=np.int64)
    fitted, cv = _impl.linear_smooth(x, y, windows)
    return np.asarray(fitted), np.asarray(cv)


def barycentric_eval(nodes, values, grid):
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]
    out = np.asarray(_impl.barycentric_eval(nodes, values, grid))
    return out[:, 0] if squeeze else out
