"""Hierarchical skeleton model: joint/bone tree, 2D rotation features,
forward kinematics, and pinhole projection.

Conventions
-----------
- Joints form a single tree rooted at the pelvis; every non-root joint
  carries the bone from its parent, so ``B == J - 1``.
- A bone's local frame is its parent bone's frame; the identity
  quaternion makes a bone continue its parent's direction. Bones whose
  start joint is the root have the world frame as parent frame, and the
  canonical bone axis is +x, so the identity orientation points along +x.
- 2D rotation features measure the signed angle from the parent bone's
  image direction (the "initial position") to the bone's image direction,
  via atan2(cross, dot) in y-down image coordinates; root-attached bones
  measure against the image +x axis. The theta = +/-pi tie breaks to +pi.
- Forward kinematics walks bones in topological order:
  ``frame(b) = frame(parent(b)) * q(b)`` and the bone direction is
  ``frame(b)`` applied to +x. Directions are renormalised so configured
  bone lengths are preserved exactly.
"""

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quat

SKEL_FORMAT = "skel/1"

_X_AXIS = np.array([1.0, 0.0, 0.0])


class SkeletonError(ValueError):
    pass


@dataclass(frozen=True)
class Skeleton:
    """Immutable joint/bone tree with rest geometry.

    ``bone_child[b]`` is the joint a bone ends at; its start joint is
    ``joint_parents[bone_child[b]]``. ``bone_parent[b]`` is the bone ending
    at the start joint (-1 when the start joint is the root).
    """

    joint_names: tuple
    joint_parents: np.ndarray        # (J,) int, -1 for the root
    bone_child: np.ndarray           # (B,) int
    rest_directions: np.ndarray      # (B, 3) unit vectors
    bone_lengths: np.ndarray         # (B,) meters, > 0
    variant: str = "custom"

    bone_parent: np.ndarray = field(init=False)
    bone_of_joint: np.ndarray = field(init=False)    # (J,) bone ending at joint, -1 for root
    joint_topo: np.ndarray = field(init=False)
    bone_topo: np.ndarray = field(init=False)

    def __post_init__(self):
        names = tuple(self.joint_names)
        object.__setattr__(self, "joint_names", names)
        parents = np.array(self.joint_parents, dtype=np.intp)
        child = np.array(self.bone_child, dtype=np.intp)
        dirs = np.array(self.rest_directions, dtype=np.float64)
        lengths = np.array(self.bone_lengths, dtype=np.float64)
        j = len(names)
        if len(set(names)) != j:
            raise SkeletonError("duplicate joint names")
        roots = np.flatnonzero(parents < 0)
        if roots.size == 0:
            raise SkeletonError("cycle detected: no root joint")
        if roots.size > 1:
            raise SkeletonError(f"multiple roots: {[names[r] for r in roots]}")
        if child.shape[0] != j - 1:
            raise SkeletonError(f"bone count {child.shape[0]} != J-1 ({j - 1})")
        if dirs.size == 0:
            dirs = dirs.reshape(0, 3)
        if dirs.shape != (j - 1, 3):
            raise SkeletonError("rest_directions must be (B, 3)")
        dev = np.abs(np.linalg.norm(dirs, axis=1) - 1.0)
        if np.any(dev > 1e-9):
            raise SkeletonError("rest directions must be unit vectors")
        if np.any(lengths <= 0.0):
            raise SkeletonError("bone lengths must be positive")

        topo = _toposort(parents, names)
        bone_of_joint = np.full(j, -1, dtype=np.intp)
        for b, c in enumerate(child):
            bone_of_joint[c] = b
        bone_parent = np.empty(j - 1, dtype=np.intp)
        for b, c in enumerate(child):
            bone_parent[b] = bone_of_joint[parents[c]]
        bone_topo = np.array(
            [bone_of_joint[jid] for jid in topo if bone_of_joint[jid] >= 0], dtype=np.intp
        )

        for arr in (parents, child, dirs, lengths, bone_parent, bone_of_joint, topo, bone_topo):
            arr.flags.writeable = False
        object.__setattr__(self, "joint_parents", parents)
        object.__setattr__(self, "bone_child", child)
        object.__setattr__(self, "rest_directions", dirs)
        object.__setattr__(self, "bone_lengths", lengths)
        object.__setattr__(self, "bone_parent", bone_parent)
        object.__setattr__(self, "bone_of_joint", bone_of_joint)
        object.__setattr__(self, "joint_topo", topo)
        object.__setattr__(self, "bone_topo", bone_topo)

    @property
    def n_joints(self):
        return len(self.joint_names)

    @property
    def n_bones(self):
        return self.bone_child.shape[0]

    @property
    def root(self):
        return int(np.flatnonzero(self.joint_parents < 0)[0])

    def joint_index(self, name):
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise SkeletonError(f"unknown joint {name!r}") from None

    def bone_name(self, b):
        """Bones are named by the joint they end at."""
        return self.joint_names[self.bone_child[b]]

    def bone_index(self, name):
        return int(self.bone_of_joint[self.joint_index(name)])

    def bone_start(self, b):
        return int(self.joint_parents[self.bone_child[b]])

    def joint_children(self, j):
        return np.flatnonzero(self.joint_parents == j)

    def bone_children(self, b):
        return np.flatnonzero(self.bone_parent == b)

    def descendant_bones(self, joint_name):
        """Ids of all bones inside the subtree hanging below the named joint
        (the bone ending at the joint itself is not included)."""
        start = self.joint_index(joint_name)
        out = []
        stack = list(self.joint_children(start))
        while stack:
            jid = stack.pop()
            out.append(int(self.bone_of_joint[jid]))
            stack.extend(self.joint_children(jid))
        return sorted(out)

    def content_hash(self):
        """Stable hex digest of the tree and rest geometry."""
        h = hashlib.sha256()
        for i, name in enumerate(self.joint_names):
            h.update(f"{name}:{self.joint_parents[i]};".encode())
        for b in range(self.n_bones):
            d = self.rest_directions[b]
            h.update(
                f"{self.bone_child[b]}:{d[0]!r},{d[1]!r},{d[2]!r},{self.bone_lengths[b]!r};".encode()
            )
        return h.hexdigest()[:16]


def _toposort(parents, names):
    j = len(names)
    order = []
    visited = np.zeros(j, dtype=bool)
    children = [[] for _ in range(j)]
    root = -1
    for i, p in enumerate(parents):
        if p < 0:
            root = i
        else:
            if p >= j:
                raise SkeletonError(f"joint {names[i]!r} has out-of-range parent")
            children[p].append(i)
    stack = [root]
    while stack:
        i = stack.pop()
        visited[i] = True
        order.append(i)
        stack.extend(reversed(children[i]))
    if not visited.all():
        bad = [names[i] for i in np.flatnonzero(~visited)]
        raise SkeletonError(f"cycle detected involving joints {bad}")
    out = np.array(order, dtype=np.intp)
    return out


def load_skeleton(text):
    """Parse a skeleton config.

    Format (one statement per line, ``#`` comments allowed)::

        format skel/1
        variant <tag>
        joint <name> <parent|-> <dir_x> <dir_y> <dir_z> <length>

    The root joint uses ``-`` as parent; its direction/length fields are
    ignored. All other joints carry the rest direction and length of the
    bone from their parent. Rest directions within 1e-3 of unit norm are
    normalised with a warning; larger deviations are rejected.
    """
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines or lines[0].split() != ["format", SKEL_FORMAT]:
        raise SkeletonError(f"missing or unsupported format header (want 'format {SKEL_FORMAT}')")
    variant = "custom"
    entries = []  # (name, parent_name_or_None, dir, length)
    for line in lines[1:]:
        tokens = line.split()
        if tokens[0] == "variant":
            if len(tokens) != 2:
                raise SkeletonError("variant line must be 'variant <tag>'")
            variant = tokens[1]
            continue
        if tokens[0] != "joint":
            raise SkeletonError(f"unknown statement {tokens[0]!r}")
        if len(tokens) < 7:
            raise SkeletonError(f"missing rest direction or length on line: {line!r}")
        name = tokens[1]
        parent = None if tokens[2] == "-" else tokens[2]
        try:
            d = np.array([float(tokens[3]), float(tokens[4]), float(tokens[5])])
            length = float(tokens[6])
        except ValueError:
            raise SkeletonError(f"malformed number on line: {line!r}") from None
        entries.append((name, parent, d, length))

    names = [e[0] for e in entries]
    index = {n: i for i, n in enumerate(names)}
    if len(index) != len(names):
        raise SkeletonError("duplicate joint names")
    parents = np.empty(len(names), dtype=np.intp)
    for i, (name, parent, _, _) in enumerate(entries):
        if parent is None:
            parents[i] = -1
        else:
            if parent not in index:
                raise SkeletonError(f"joint {name!r} has unknown parent {parent!r}")
            parents[i] = index[parent]

    bone_child = []
    dirs = []
    lengths = []
    for i, (name, parent, d, length) in enumerate(entries):
        if parent is None:
            continue
        n = np.linalg.norm(d)
        if n == 0.0:
            raise SkeletonError(f"missing rest direction for joint {name!r}")
        if abs(n - 1.0) > 1e-3:
            raise SkeletonError(f"non-unit rest direction for joint {name!r} (norm {n:.6f})")
        if abs(n - 1.0) > 1e-9:
            warnings.warn(f"rest direction for {name!r} normalised (norm {n:.6f})")
        if length <= 0.0:
            raise SkeletonError(f"non-positive bone length for joint {name!r}")
        bone_child.append(i)
        dirs.append(d / n)
        lengths.append(length)

    return Skeleton(
        joint_names=tuple(names),
        joint_parents=parents,
        bone_child=np.array(bone_child, dtype=np.intp),
        rest_directions=np.array(dirs, dtype=np.float64).reshape(len(bone_child), 3),
        bone_lengths=np.array(lengths, dtype=np.float64),
        variant=variant,
    )


def _frozen(a):
    a = np.asarray(a, dtype=np.float64)
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Pose2DSequence:
    """Per-frame 2D joint coordinates in image pixels, shape (T, J, 2)."""

    coords: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coords)
        if c.ndim != 3 or c.shape[2] != 2:
            raise ValueError("coords must be (T, J, 2)")
        if not np.isfinite(c).all():
            raise ValueError("coords must be finite")
        object.__setattr__(self, "coords", c)

    @property
    def frames(self):
        return self.coords.shape[0]

    @property
    def n_joints(self):
        return self.coords.shape[1]


@dataclass(frozen=True)
class Rotation2DSequence:
    """Per-frame, per-bone (cos, sin) rotation features, shape (T, B, 2)."""

    feats: np.ndarray

    def __post_init__(self):
        f = _frozen(self.feats)
        if f.ndim != 3 or f.shape[2] != 2:
            raise ValueError("feats must be (T, B, 2)")
        r = (f ** 2).sum(axis=2)
        if f.size and np.abs(r - 1.0).max() > 1e-9:
            raise ValueError("rotation features must satisfy cos^2 + sin^2 = 1")
        object.__setattr__(self, "feats", f)

    @property
    def frames(self):
        return self.feats.shape[0]

    @property
    def n_bones(self):
        return self.feats.shape[1]


@dataclass(frozen=True)
class OrientationSequence:
    """Root trajectory plus per-bone local orientation quaternions.

    ``root_positions`` is (F, 3) meters; ``quats`` is (F, B, 4) wxyz unit
    quaternions in each bone's local frame.
    """

    root_positions: np.ndarray
    quats: np.ndarray

    def __post_init__(self):
        rp = _frozen(self.root_positions)
        q = _frozen(self.quats)
        if rp.ndim != 2 or rp.shape[1] != 3:
            raise ValueError("root_positions must be (F, 3)")
        if q.ndim != 3 or q.shape[2] != 4:
            raise ValueError("quats must be (F, B, 4)")
        if q.shape[0] != rp.shape[0]:
            raise ValueError("frame count mismatch between quats and root_positions")
        if rp.shape[0] < 1:
            raise ValueError("need at least one frame")
        if q.size:
            dev = np.abs(np.linalg.norm(q, axis=2) - 1.0).max()
            if dev > 1e-6:
                raise ValueError(f"quaternions must be unit-norm (max deviation {dev:.3g})")
        object.__setattr__(self, "root_positions", rp)
        object.__setattr__(self, "quats", q)

    @property
    def frames(self):
        return self.quats.shape[0]

    @property
    def n_bones(self):
        return self.quats.shape[1]


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: intrinsics in pixels, extrinsics world -> camera
    (``x_cam = rotate(rotation, x_world) + translation``)."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = None
    translation: np.ndarray = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        rot = quat.IDENTITY if self.rotation is None else self.rotation
        tr = np.zeros(3) if self.translation is None else self.translation
        rot = _frozen(rot)
        tr = _frozen(tr)
        if rot.shape != (4,) or abs(np.linalg.norm(rot) - 1.0) > 1e-6:
            raise ValueError("extrinsic rotation must be a unit quaternion")
        if tr.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    def to_camera(self, points):
        return quat.rotate(self.rotation, points) + self.translation


def compute_2d_rotations(pose, skel):
    """Per-bone (cos, sin) of the signed angle from the parent bone's image
    direction to the bone's image direction.

    Root-attached bones measure against the image +x axis. Raises if any
    bone projects to zero length in some frame.
    """
    coords = pose.coords
    if pose.n_joints != skel.n_joints:
        raise ValueError(f"pose has {pose.n_joints} joints, skeleton has {skel.n_joints}")
    t, _, _ = coords.shape
    nb = skel.n_bones
    child = skel.bone_child
    start = skel.joint_parents[child]

    u = coords[:, child, :] - coords[:, start, :]          # (T, B, 2)
    lens = np.linalg.norm(u, axis=2)
    if np.any(lens == 0.0):
        tf, bf = np.argwhere(lens == 0.0)[0]
        raise ValueError(
            f"zero-length bone projection at frame {tf} bone {skel.bone_name(bf)!r}"
        )

    v = np.empty_like(u)
    has_parent = skel.bone_parent >= 0
    v[:, ~has_parent, 0] = 1.0
    v[:, ~has_parent, 1] = 0.0
    v[:, has_parent, :] = u[:, skel.bone_parent[has_parent], :]

    dot = (u * v).sum(axis=2)
    cross = v[..., 0] * u[..., 1] - v[..., 1] * u[..., 0]
    h = np.hypot(dot, cross)
    feats = np.empty((t, nb, 2), dtype=np.float64)
    feats[..., 0] = dot / h
    feats[..., 1] = cross / h
    # theta = atan2(sin, cos) in [-pi, pi]; the -pi boundary maps to +pi,
    # i.e. (cos, sin) = (-1, -0.0) is stored as (-1, 0.0)
    anti = (feats[..., 0] == -1.0) & (feats[..., 1] == 0.0)
    feats[..., 1][anti] = 0.0
    return Rotation2DSequence(feats)


def frame_angles(rots):
    """Signed angles in (-pi, pi] recovered from (cos, sin) features."""
    theta = np.arctan2(rots.feats[..., 1], rots.feats[..., 0])
    theta[theta == -np.pi] = np.pi
    return theta


def forward_kinematics(root_position, quats_frame, skel):
    """3D joint positions for one frame of local bone quaternions.

    ``quats_frame`` is (B, 4). Quaternions off unit norm by more than 1e-3
    are rejected; deviations above 1e-6 are renormalised.
    """
    root_position = np.asarray(root_position, dtype=np.float64)
    q = np.array(quats_frame, dtype=np.float64).reshape(skel.n_bones, 4)
    if not np.isfinite(root_position).all():
        raise ValueError("root position must be finite")
    if q.size:
        dev = np.abs(np.linalg.norm(q, axis=1) - 1.0)
        if np.any(dev > 1e-3):
            b = int(np.argmax(dev))
            raise ValueError(f"non-unit quaternion for bone {skel.bone_name(b)!r}")
        fix = dev > 1e-6
        if np.any(fix):
            q[fix] /= np.linalg.norm(q[fix], axis=1, keepdims=True)

    joints = np.empty((skel.n_joints, 3), dtype=np.float64)
    frames = np.empty((skel.n_bones, 4), dtype=np.float64)
    joints[skel.root] = root_position
    for b in skel.bone_topo:
        p = skel.bone_parent[b]
        frames[b] = q[b] if p < 0 else quat.multiply(frames[p], q[b])
        d = quat.rotate(frames[b], _X_AXIS)
        d /= np.linalg.norm(d)
        joints[skel.bone_child[b]] = joints[skel.bone_start(b)] + skel.bone_lengths[b] * d
    return joints


def fk_sequence(seq, skel):
    """forward_kinematics applied to every frame; returns (F, J, 3)."""
    out = np.empty((seq.frames, skel.n_joints, 3), dtype=np.float64)
    for f in range(seq.frames):
        out[f] = forward_kinematics(seq.root_positions[f], seq.quats[f], skel)
    return out


def project_to_2d(joints3d, cam, names=None):
    """Pinhole projection of (..., 3) world points to (..., 2) pixels.

    Raises on any non-positive camera-frame depth, naming the joint.
    """
    pts = cam.to_camera(np.asarray(joints3d, dtype=np.float64))
    z = pts[..., 2]
    if np.any(z <= 0.0):
        idx = int(np.argwhere(z <= 0.0)[0][-1])
        label = names[idx] if names is not None else f"#{idx}"
        raise ValueError(f"non-positive depth for joint {label}")
    out = np.empty(pts.shape[:-1] + (2,), dtype=np.float64)
    out[..., 0] = cam.fx * pts[..., 0] / z + cam.cx
    out[..., 1] = cam.fy * pts[..., 1] / z + cam.cy
    return out
