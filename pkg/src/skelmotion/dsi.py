"""Dynamic skeletal interpolation of orientation sequences.

The pipeline: flip quaternion signs for continuity, measure the weighted
angular distance between adjacent frames, cut the sequence where the
distance exceeds a threshold, interpolate every piece with component-wise
Lagrange polynomials (quiet pieces at the base rate, cut transitions with
a density that grows with the jump size), generate randomised variants,
smooth every channel, and renormalise.

Frame indices in this module are 1-based: a sequence of F frames spans
``[1, F]`` and the incoming distance of frame f (f >= 2) is measured
against frame f-1. Output grids are anchored at the original frames, so
every original frame is an exact sample of the interpolated output.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, quat
from .skeleton import OrientationSequence
from .smoother import SmootherConfig, supersmooth

NORMAL, EDGE = "normal", "edge"


@dataclass(frozen=True)
class InterpolationParams:
    threshold: float = 0.3        # radians; segmentation cut level
    delta: float = 0.2            # original:interpolated frame ratio, <= 1
    eta: float = 25.0             # transition densification coefficient
    variants: int = 1             # V, >= 1
    bone_weights: tuple = None    # per-bone, >= 0; None = uniform
    variation_sigma: float = 0.03  # radians of per-segment wiggle
    seed: int = 0
    keyframe_tolerance: float = 0.05   # radians; documented post-condition
    max_nodes: int = 6            # Lagrange degree cap per piece
    # tighter spans than the smoother's defaults: the input here is an
    # upsampled noise-free curve, and wide windows would erode keyframes
    smoother: SmootherConfig = field(
        default_factory=lambda: SmootherConfig(spans=(0.005, 0.03, 0.12))
    )

    def __post_init__(self):
        if self.threshold <= 0.0:
            raise ValueError("threshold must be positive")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must be in (0, 1]")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.variants < 1:
            raise ValueError("need at least one variant")
        if self.variation_sigma < 0.0:
            raise ValueError("variation_sigma must be >= 0")
        if self.max_nodes < 2:
            raise ValueError("max_nodes must be >= 2")
        if self.bone_weights is not None:
            w = tuple(float(v) for v in self.bone_weights)
            if any(v < 0.0 for v in w) or sum(w) <= 0.0:
                raise ValueError("bone weights must be >= 0 and sum > 0")
            object.__setattr__(self, "bone_weights", w)


@dataclass
class VariantSet:
    """Interpolated variants plus the provenance needed to reproduce them.

    ``abscissae`` maps output samples of the base variant back to 1-based
    positions on the original frame axis; ``keyframe_indices`` are the
    output indices holding the original frames. ``max_keyframe_error`` is
    the measured post-smoothing angular drift of the base variant at the
    original frames.
    """

    sequences: list
    abscissae: np.ndarray
    keyframe_indices: np.ndarray
    intervals: list
    seed: int
    params: InterpolationParams
    max_keyframe_error: float = 0.0

    @property
    def n_variants(self):
        return len(self.sequences)

    @property
    def frames(self):
        return self.sequences[0].frames


def _quats_of(seq):
    return seq.quats if isinstance(seq, OrientationSequence) else np.asarray(seq)


def frame_distance(seq, f, weights=None):
    """Weighted mean angular distance between frames f-1 and f (1-based).

    Weights are normalised to sum to one; ``f`` must be in [2, F].
    """
    q = _quats_of(seq)
    nf, nb = q.shape[0], q.shape[1]
    if not 2 <= f <= nf:
        raise ValueError(f"frame index {f} out of range [2, {nf}]")
    w = _weights_arr(weights, nb)
    d = kernels.quat_angular_distance(q[f - 1], q[f - 2])
    return float((w * d).sum())


def _weights_arr(weights, n_bones):
    if weights is None:
        return np.full(n_bones, 1.0 / n_bones)
    w = np.asarray(weights, dtype=np.float64)
    return w / w.sum()


def frame_distances(quats, weights=None):
    """All incoming distances; entry j is the distance of frame j+2."""
    w = _weights_arr(weights, quats.shape[1])
    d = kernels.quat_angular_distance(quats[1:], quats[:-1])
    return d @ w


def segment(seq, params):
    """Cut the sequence before every frame whose incoming distance exceeds
    the threshold.

    Returns closed 1-based intervals ``(start, end, kind)`` that tile
    [1, F]; consecutive intervals share their boundary frame. A jump at
    frame f yields the transition interval ``(f-1, f, 'edge')``.
    """
    q = _quats_of(seq)
    nf = q.shape[0]
    if nf < 2:
        raise ValueError("need at least two frames")
    d = frame_distances(q, params.bone_weights)
    jumps = np.flatnonzero(d > params.threshold) + 2   # 1-based frame ids
    out = []
    start = 1
    for f in jumps:
        if f - 1 > start:
            out.append((start, int(f - 1), NORMAL))
        out.append((int(f - 1), int(f), EDGE))
        start = int(f)
    if nf > start:
        out.append((start, nf, NORMAL))
    return out


def _normal_grid(a, b, delta):
    """Evenly subdivided grid over [a, b] hitting every integer frame."""
    per_gap = max(1, int(round(1.0 / delta)))
    parts = [np.linspace(t, t + 1, per_gap + 1)[:-1] for t in range(a, b)]
    parts.append(np.array([float(b)]))
    return np.concatenate(parts)


def _edge_grid(a, b, n_points):
    return np.linspace(a, b, max(2, n_points))


def edge_point_count(d, params):
    """Interpolated sample count for a transition with jump size ``d``."""
    return max(2, int(params.eta * d / params.delta))


def lagrange_segment(values, nodes, grid, max_nodes=6):
    """Component-wise Lagrange interpolation over one piece.

    ``values`` is (m, ...) at ``nodes`` (m >= 2, strictly increasing);
    evaluation is exact at the nodes. Pieces longer than ``max_nodes``
    are chunked with one shared node so polynomial degree stays bounded.
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    m = nodes.shape[0]
    if m < 2:
        raise ValueError("interval needs at least 2 sample frames")
    shape = values.shape[1:]
    flat = values.reshape(m, -1)
    if m <= max_nodes:
        out = kernels.barycentric_eval(nodes, flat, grid)
        return out.reshape((grid.shape[0],) + shape)

    out = np.empty((grid.shape[0], flat.shape[1]))
    start = 0
    while start < m - 1:
        stop = min(start + max_nodes - 1, m - 1)
        last = stop == m - 1
        sel = (grid >= nodes[start]) & ((grid <= nodes[stop]) if last else (grid < nodes[stop]))
        if sel.any():
            out[sel] = kernels.barycentric_eval(
                nodes[start:stop + 1], flat[start:stop + 1], grid[sel]
            )
        start = stop
    return out.reshape((grid.shape[0],) + shape)


def _interpolate_base(quats, roots, params):
    """Segment + per-piece interpolation on the frame-anchored grid.

    Returns (abscissae, q_raw, r_raw, intervals, segment_ranges) where
    ``segment_ranges`` partition the output samples per interval.
    """
    nf = quats.shape[0]
    intervals = segment(quats, params)
    d = frame_distances(quats, params.bone_weights)
    chunks_x, chunks_q, chunks_r, ranges = [], [], [], []
    offset = 0
    for start, end, kind in intervals:
        if kind == NORMAL:
            grid = _normal_grid(start, end, params.delta)
        else:
            grid = _edge_grid(start, end, edge_point_count(d[end - 2], params))
        nodes = np.arange(start, end + 1, dtype=np.float64)
        vals = quats[start - 1:end]
        qi = lagrange_segment(vals, nodes, grid, params.max_nodes)
        ri = np.stack(
            [np.interp(grid, nodes, roots[start - 1:end, k]) for k in range(3)], axis=1
        )
        if offset > 0:   # drop the shared boundary sample
            grid, qi, ri = grid[1:], qi[1:], ri[1:]
        chunks_x.append(grid)
        chunks_q.append(qi)
        chunks_r.append(ri)
        ranges.append((offset, offset + grid.shape[0]))
        offset += grid.shape[0]
    x = np.concatenate(chunks_x)
    return x, np.concatenate(chunks_q), np.concatenate(chunks_r), intervals, ranges


def _resample(x_norm, values, n_out):
    """Linear resample of (L, ...) values onto n_out evenly spaced positions."""
    pos = np.linspace(0.0, 1.0, n_out)
    flat = values.reshape(values.shape[0], -1)
    out = np.empty((n_out, flat.shape[1]))
    for k in range(flat.shape[1]):
        out[:, k] = np.interp(pos, x_norm, flat[:, k])
    return out.reshape((n_out,) + values.shape[1:])


def random_variants(q_raw, r_raw, ranges, params):
    """Base sequence plus V-1 randomised variants, all of equal length.

    Variant 0 passes through unchanged. Others compose one small random
    rotation per (segment, bone) onto the quaternions (axis uniform on the
    sphere, angle half-normal with scale ``variation_sigma``) and time-warp
    each segment by a factor in [0.9, 1.1], then resample back to the base
    length. Derived seeds make each variant independently reproducible.
    """
    n_out = q_raw.shape[0]
    nb = q_raw.shape[1]
    variants = [(q_raw, r_raw)]
    for v in range(1, params.variants):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=params.seed, spawn_key=(v,))
        )
        q = q_raw.copy()
        seg_q, seg_r = [], []
        for lo, hi in ranges:
            axes = rng.normal(size=(nb, 3))
            angles = np.abs(rng.normal(0.0, params.variation_sigma, size=nb))
            wiggle = quat.from_axis_angle(axes, angles)
            q[lo:hi] = kernels.hamilton(wiggle[None, :, :], q[lo:hi])
            factor = rng.uniform(0.9, 1.1)
            length = max(2, int(round((hi - lo) * factor)))
            xn = np.linspace(0.0, 1.0, hi - lo)
            seg_q.append(_resample(xn, q[lo:hi], length))
            seg_r.append(_resample(xn, r_raw[lo:hi], length))
        qv = np.concatenate(seg_q)
        rv = np.concatenate(seg_r)
        xn = np.linspace(0.0, 1.0, qv.shape[0])
        variants.append((_resample(xn, qv, n_out), _resample(xn, rv, n_out)))
    return variants


def renormalize(quats, floor=0.5):
    """Unit-normalise, reseeding frames whose interpolated norm collapsed.

    Per bone, frames with norm below ``floor`` (the interpolant passed
    near the antipode) are replaced by the spherical interpolation of the
    nearest healthy neighbours before normalising.
    """
    q = np.array(quats, dtype=np.float64)
    norms = np.linalg.norm(q, axis=-1)
    bad_b = np.flatnonzero((norms < floor).any(axis=0))
    for b in bad_b:
        good = np.flatnonzero(norms[:, b] >= floor)
        if good.size == 0:
            raise ValueError(f"all frames degenerate for bone {b}")
        for f in np.flatnonzero(norms[:, b] < floor):
            after = good[np.searchsorted(good, f)] if f < good[-1] else -1
            before = good[np.searchsorted(good, f) - 1] if f > good[0] else -1
            if before < 0:
                q[f, b] = q[after, b]
            elif after < 0:
                q[f, b] = q[before, b]
            else:
                t = (f - before) / (after - before)
                q[f, b] = quat.slerp(q[before, b], q[after, b], t)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def dsi(seq, params):
    """Full dynamic interpolation: segment, interpolate, vary, smooth,
    renormalise. Deterministic for fixed (input, params, seed)."""
    if seq.frames < 2:
        raise ValueError("need at least two frames")
    if seq.n_bones < 1:
        raise ValueError("need at least one bone")
    q0 = quat.enforce_sign_continuity(seq.quats)
    x, q_raw, r_raw, intervals, ranges = _interpolate_base(
        q0, seq.root_positions, params
    )
    keyframes = np.flatnonzero(np.isin(x, np.arange(1.0, seq.frames + 1.0)))

    variants = random_variants(q_raw, r_raw, ranges, params)
    smooth_on = x.shape[0] >= 5
    sequences = []
    for qv, rv in variants:
        if smooth_on:
            qs = np.empty_like(qv)
            flat_in = qv.reshape(qv.shape[0], -1)
            flat_out = qs.reshape(qs.shape[0], -1)
            for k in range(flat_in.shape[1]):
                flat_out[:, k] = supersmooth(x, flat_in[:, k], params.smoother)
            rs = np.empty_like(rv)
            for k in range(3):
                rs[:, k] = supersmooth(x, rv[:, k], params.smoother)
        else:
            qs, rs = qv, rv
        sequences.append(
            OrientationSequence(root_positions=rs, quats=renormalize(qs))
        )

    err = kernels.quat_angular_distance(sequences[0].quats[keyframes], q0).max()
    return VariantSet(
        sequences=sequences,
        abscissae=x,
        keyframe_indices=keyframes,
        intervals=intervals,
        seed=params.seed,
        params=params,
        max_keyframe_error=float(err),
    )


def baseline_pi(seq, delta=0.2):
    """Global Lagrange fit over all frames: no segmentation at all.

    Returns (sequence, boundaries) with an always-empty boundary list.
    Numerically sensible for modest frame counts only; the abscissae are
    rescaled to [-1, 1] for the barycentric weights.
    """
    q0 = quat.enforce_sign_continuity(seq.quats)
    nf = seq.frames
    nodes = np.arange(1.0, nf + 1.0)
    grid = _normal_grid(1, nf, delta)
    c = 0.5 * (nodes[0] + nodes[-1])
    h = 0.5 * (nodes[-1] - nodes[0])
    flat = q0.reshape(nf, -1)
    qi = kernels.barycentric_eval((nodes - c) / h, flat, (grid - c) / h)
    qi = qi.reshape(grid.shape[0], seq.n_bones, 4)
    ri = np.stack(
        [np.interp(grid, nodes, seq.root_positions[:, k]) for k in range(3)], axis=1
    )
    out = OrientationSequence(root_positions=ri, quats=renormalize(qi))
    return out, []


def baseline_pwpi(seq, delta=0.2, window=7, degree=3):
    """Point-wise sliding-window least-squares polynomial interpolation.

    Every output sample is the value of a degree-``degree`` polynomial fit
    to the ``window`` nearest original frames. With ``degree < window - 1``
    the fit is a smoother, not an interpolant, so sharp transitions lose
    amplitude; that is the behaviour this baseline exists to show.
    """
    if window < degree + 1:
        raise ValueError("window must be at least degree + 1")
    q0 = quat.enforce_sign_continuity(seq.quats)
    nf = seq.frames
    if window > nf:
        raise ValueError("window exceeds frame count")
    grid = _normal_grid(1, nf, delta)
    flat = np.concatenate(
        [q0.reshape(nf, -1), seq.root_positions], axis=1
    )
    starts = np.clip(np.round(grid).astype(int) - window // 2, 1, nf - window + 1)
    out = np.empty((grid.shape[0], flat.shape[1]))
    for k in np.unique(starts):
        sel = starts == k
        xs = np.arange(k, k + window, dtype=np.float64)
        coef = np.polyfit(xs - k, flat[k - 1:k - 1 + window], degree)
        out[sel] = np.polynomial.polynomial.polyval(
            grid[sel] - k, coef[::-1]
        ).T
    qi = out[:, : seq.n_bones * 4].reshape(grid.shape[0], seq.n_bones, 4)
    ri = out[:, seq.n_bones * 4:]
    return OrientationSequence(root_positions=ri, quats=renormalize(qi))
