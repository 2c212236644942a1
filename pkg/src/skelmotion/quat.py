"""Quaternion algebra and the angular-distance metrics used for training
and evaluation.

Quaternions are float64 arrays with wxyz layout in the last axis; every
function broadcasts over leading axes. All distances treat ``q`` and
``-q`` as the same rotation (double cover), so the angular distance lives
in ``[0, pi]``.
"""

import numpy as np

from . import kernels

UNIT_TOL = 1e-6

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def identity(shape=()):
    """Array of identity quaternions with the given leading shape."""
    out = np.zeros(tuple(shape) + (4,), dtype=np.float64)
    out[..., 0] = 1.0
    return out


def norm(q):
    return np.linalg.norm(np.asarray(q, dtype=np.float64), axis=-1)


def normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def conjugate(q):
    q = np.asarray(q, dtype=np.float64)
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def multiply(a, b):
    """Hamilton product a * b."""
    return kernels.hamilton(a, b)


def from_axis_angle(axis, angle):
    """Unit quaternion rotating by ``angle`` (radians) about ``axis``.

    ``axis`` is normalised internally; broadcasts over leading axes.
    """
    axis = np.asarray(axis, dtype=np.float64)
    angle = np.asarray(angle, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = angle / 2.0
    shape = np.broadcast_shapes(axis.shape[:-1], angle.shape)
    out = np.empty(shape + (4,), dtype=np.float64)
    out[..., 0] = np.cos(half)
    out[..., 1:] = np.broadcast_to(axis, shape + (3,)) * np.sin(half)[..., None]
    return out


def rotate(q, v):
    """Rotate vectors ``v`` by unit quaternions ``q`` (q v q*)."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u = q[..., 1:]
    w = q[..., 0:1]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def _require_unit(q, name):
    dev = np.abs(norm(q) - 1.0)
    if np.any(dev > UNIT_TOL):
        raise ValueError(f"{name} is not unit-norm (max deviation {dev.max():.3g})")


def angular_distance(a, b):
    """Angular distance 2*arccos(|Re(a * conj(b))|) between unit quaternions.

    Symmetric, zero iff a == +/-b, and bounded by pi. Inputs must be unit
    within 1e-6.
    """
    _require_unit(a, "a")
    _require_unit(b, "b")
    return kernels.quat_angular_distance(a, b)


def absolute_angular_distance(q):
    """Angular distance from ``q`` to the identity quaternion."""
    _require_unit(q, "q")
    return kernels.quat_angular_distance(q, np.broadcast_to(IDENTITY, np.shape(q)))


def aad_loss(pred, gt, signed=False):
    """Mean angular distance over all (frame, bone) pairs.

    ``signed=True`` evaluates the raw ``2*arccos(Re(.))`` form, which
    penalises the quaternion sign and ranges up to 2*pi; the default folds
    the double cover.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    _require_unit(pred, "pred")
    _require_unit(gt, "gt")
    if signed:
        dot = np.clip((pred * gt).sum(axis=-1), -1.0, 1.0)
        return float(np.mean(2.0 * np.arccos(dot)))
    return float(np.mean(kernels.quat_angular_distance(pred, gt)))


def wmpjpe(pred_traj, gt_traj, depths=None):
    """Depth-weighted mean root position error.

    Per frame: ``||pred - gt||_2 / depth``; ``depths=None`` uses unit
    weights. Weighting by the inverse ground-truth depth is the default
    trajectory-supervision convention here.
    """
    pred_traj = np.asarray(pred_traj, dtype=np.float64)
    gt_traj = np.asarray(gt_traj, dtype=np.float64)
    if pred_traj.shape != gt_traj.shape:
        raise ValueError(f"shape mismatch: {pred_traj.shape} vs {gt_traj.shape}")
    err = np.linalg.norm(pred_traj - gt_traj, axis=-1)
    if depths is None:
        return float(err.mean())
    depths = np.asarray(depths, dtype=np.float64)
    if depths.shape != err.shape:
        raise ValueError(f"depths shape {depths.shape} does not match {err.shape}")
    if np.any(depths <= 0.0):
        raise ValueError("depths must be positive")
    return float((err / depths).mean())


def maad(pred, gt, bones):
    """aad_loss restricted to the listed bone indices.

    ``pred`` and ``gt`` are (F, B, 4); ``bones`` a nonempty sequence of
    valid bone ids.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    bones = np.asarray(bones, dtype=np.intp)
    if bones.size == 0:
        raise ValueError("empty subset")
    nb = pred.shape[-2]
    if np.any(bones < 0) or np.any(bones >= nb):
        bad = bones[(bones < 0) | (bones >= nb)]
        raise ValueError(f"unknown bone id(s) {bad.tolist()} (B={nb})")
    return aad_loss(pred[..., bones, :], gt[..., bones, :])


def slerp(a, b, t):
    """Spherical linear interpolation from a to b along the shorter arc."""
    a = normalize(np.asarray(a, dtype=np.float64))
    b = normalize(np.asarray(b, dtype=np.float64))
    dot = float((a * b).sum(axis=-1))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        return normalize(a + t * (b - a))
    theta = np.arccos(dot)
    s = np.sin(theta)
    return (np.sin((1.0 - t) * theta) * a + np.sin(t * theta) * b) / s


def enforce_sign_continuity(quats):
    """Flip frame-to-frame signs so consecutive dot products are >= 0.

    ``quats`` is (F, ..., 4); the first frame is kept as given. Returns a
    new array.
    """
    quats = np.array(quats, dtype=np.float64)
    flat = quats.reshape(quats.shape[0], -1, 4)
    for f in range(1, flat.shape[0]):
        dots = (flat[f] * flat[f - 1]).sum(axis=-1)
        flat[f][dots < 0.0] *= -1.0
    return quats
