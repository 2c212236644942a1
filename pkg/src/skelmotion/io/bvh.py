"""Biovision hierarchy export.

The HIERARCHY section mirrors the joint tree; each joint's OFFSET is its
bone's rest direction scaled by the bone length (metres). The root
carries position plus rotation channels, every other joint three rotation
channels in ZXY order (intrinsic: R = Rz Rx Ry on column vectors,
right-handed, y-up). Channel values are the bone-local quaternions of the
joint's incoming bone converted to degrees; the root's rotation channels
are zero because the root has no bone.
"""

import numpy as np

from .. import quat


def quat_to_euler_zxy(q):
    """ZXY intrinsic Euler angles (radians) for unit quaternions (..., 4).

    Returns (..., 3) as (z, x, y). Within gimbal lock (|cos x| ~ 0) the y
    angle is set to zero and z absorbs the remaining rotation.
    """
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r21 = 2.0 * (y * z + w * x)
    r01 = 2.0 * (x * y - w * z)
    r11 = 1.0 - 2.0 * (x * x + z * z)
    r20 = 2.0 * (x * z - w * y)
    r22 = 1.0 - 2.0 * (x * x + y * y)
    r10 = 2.0 * (x * y + w * z)
    r00 = 1.0 - 2.0 * (y * y + z * z)

    ex = np.arcsin(np.clip(r21, -1.0, 1.0))
    locked = np.abs(r21) > 1.0 - 1e-12
    ez = np.where(locked, np.arctan2(r10, r00), np.arctan2(-r01, r11))
    ey = np.where(locked, 0.0, np.arctan2(-r20, r22))
    return np.stack([ez, ex, ey], axis=-1)


def euler_zxy_to_quat(euler):
    """Inverse of quat_to_euler_zxy: (..., 3) radians (z, x, y) to wxyz."""
    e = np.asarray(euler, dtype=np.float64)
    qz = quat.from_axis_angle(np.array([0.0, 0.0, 1.0]), e[..., 0])
    qx = quat.from_axis_angle(np.array([1.0, 0.0, 0.0]), e[..., 1])
    qy = quat.from_axis_angle(np.array([0.0, 1.0, 0.0]), e[..., 2])
    return quat.multiply(quat.multiply(qz, qx), qy)


def _fmt_pos(v):
    return f"{v:.8f}"


def _fmt_rot(v):
    return f"{v:.10f}"


def export_bvh(seq, skel, fps=30.0):
    """Render an OrientationSequence as BVH text."""
    if seq.n_bones != skel.n_bones:
        raise ValueError("sequence bone count does not match the skeleton")
    lines = ["HIERARCHY"]

    def offset_of(jid):
        b = skel.bone_of_joint[jid]
        if b < 0:
            return np.zeros(3)
        return skel.bone_lengths[b] * skel.rest_directions[b]

    def emit(jid, depth):
        pad = "  " * depth
        if depth == 0:
            lines.append(f"ROOT {skel.joint_names[jid]}")
        else:
            lines.append(f"{pad}JOINT {skel.joint_names[jid]}")
        lines.append(pad + "{")
        off = offset_of(jid)
        lines.append(f"{pad}  OFFSET {' '.join(_fmt_pos(v) for v in off)}")
        if depth == 0:
            lines.append(
                f"{pad}  CHANNELS 6 Xposition Yposition Zposition"
                " Zrotation Xrotation Yrotation"
            )
        else:
            lines.append(f"{pad}  CHANNELS 3 Zrotation Xrotation Yrotation")
        children = skel.joint_children(jid)
        if children.size == 0:
            b = skel.bone_of_joint[jid]
            tip = 0.1 * skel.bone_lengths[b] * skel.rest_directions[b]
            lines.append(f"{pad}  End Site")
            lines.append(pad + "  {")
            lines.append(f"{pad}    OFFSET {' '.join(_fmt_pos(v) for v in tip)}")
            lines.append(pad + "  }")
        else:
            for c in children:
                emit(int(c), depth + 1)
        lines.append(pad + "}")

    emit(skel.root, 0)

    order = [jid for jid in _hierarchy_order(skel) if jid != skel.root]
    lines.append("MOTION")
    lines.append(f"Frames: {seq.frames}")
    lines.append(f"Frame Time: {1.0 / fps:.8f}")
    deg = 180.0 / np.pi
    for f in range(seq.frames):
        row = [_fmt_pos(v) for v in seq.root_positions[f]]
        row.extend(_fmt_rot(0.0) for _ in range(3))
        for jid in order:
            e = quat_to_euler_zxy(seq.quats[f, skel.bone_of_joint[jid]]) * deg
            row.extend(_fmt_rot(v) for v in e)
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def _hierarchy_order(skel):
    """Joint ids in the depth-first order the hierarchy is written."""
    order = []

    def walk(jid):
        order.append(jid)
        for c in skel.joint_children(jid):
            walk(int(c))

    walk(skel.root)
    return order
