"""Variable-span smoother with cross-validated span selection.

Three running local-linear fits at increasing spans are compared through
their leave-one-out absolute residuals; the winning span per point is
itself smoothed, the primary fits are blended at that span, and a final
local-linear pass runs at the blended per-point span. Windows are
nearest-neighbour and truncated at the sequence ends.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class SmootherConfig:
    spans: tuple = (0.05, 0.2, 0.5)   # fractions of the series length
    bass: float = 0.0                 # 0..10; pulls spans toward the largest
    min_window: int = 3

    def __post_init__(self):
        spans = tuple(float(s) for s in self.spans)
        object.__setattr__(self, "spans", spans)
        if len(spans) < 2 or any(not 0.0 < s <= 1.0 for s in spans):
            raise ValueError("spans must lie in (0, 1]")
        if any(b <= a for a, b in zip(spans, spans[1:])):
            raise ValueError("spans must be strictly increasing")
        if not 0.0 <= self.bass <= 10.0:
            raise ValueError("bass must be in [0, 10]")
        if self.min_window < 3:
            raise ValueError("min_window must be >= 3")


DEFAULT_CONFIG = SmootherConfig()


def _window_sizes(n, span, min_window):
    return int(np.clip(round(span * n), min_window, n))


def supersmooth(x, y, config=DEFAULT_CONFIG):
    """Smooth ``y`` sampled at strictly increasing ``x``.

    Needs at least 5 points. The output can overshoot the input range by
    at most one local linear fit's extrapolation at a truncated boundary
    window; in practice this stays within ``1.5 *`` the input range.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1D of equal length")
    n = x.shape[0]
    if n < 5:
        raise ValueError("need at least 5 points")
    d = np.diff(x)
    if np.any(d == 0.0):
        raise ValueError("duplicate abscissae")
    if np.any(d < 0.0):
        raise ValueError("abscissae must be strictly increasing")

    spans = np.array(config.spans)
    mid_window = _window_sizes(n, spans[len(spans) // 2], config.min_window)

    fits = np.empty((len(spans), n))
    resids = np.empty((len(spans), n))
    for s, span in enumerate(spans):
        m = _window_sizes(n, span, config.min_window)
        fitted, cv = kernels.linear_smooth(x, y, m)
        fits[s] = fitted
        resids[s], _ = kernels.linear_smooth(x, np.abs(y - cv), mid_window)

    best = np.argmin(resids, axis=0)
    best_span = spans[best]
    if config.bass > 0.0:
        largest = resids[-1]
        ratio = np.divide(resids.min(axis=0), largest,
                          out=np.zeros(n), where=largest > 0.0)
        best_span = best_span + ratio ** (10.0 - config.bass) * (spans[-1] - best_span)

    smoothed_span, _ = kernels.linear_smooth(x, best_span, mid_window)
    smoothed_span = np.clip(smoothed_span, spans[0], spans[-1])

    hi = np.clip(np.searchsorted(spans, smoothed_span), 1, len(spans) - 1)
    lo = hi - 1
    w = (smoothed_span - spans[lo]) / (spans[hi] - spans[lo])
    idx = np.arange(n)
    blended = (1.0 - w) * fits[lo, idx] + w * fits[hi, idx]

    final_windows = np.clip(np.rint(smoothed_span * n), config.min_window, n).astype(np.int64)
    out, _ = kernels.linear_smooth(x, blended, final_windows)
    return out
