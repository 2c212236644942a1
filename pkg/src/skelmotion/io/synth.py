"""Synthetic training data: smooth random orientation curves, forward
kinematics, and pinhole projection into consistent 2D observations.
"""

from dataclasses import dataclass

import numpy as np

from .. import quat
from ..skeleton import (
    Camera,
    OrientationSequence,
    Pose2DSequence,
    compute_2d_rotations,
    fk_sequence,
    project_to_2d,
)


@dataclass(frozen=True)
class SyntheticSample:
    pose: Pose2DSequence
    rots: object                  # Rotation2DSequence
    orientations: OrientationSequence
    camera: Camera
    seed: int

    def depths(self):
        """Camera-frame depth of the root per frame (for loss weighting)."""
        return self.camera.to_camera(self.orientations.root_positions)[:, 2]


def _sample_orientations(rng, n_bones, frames):
    t = np.arange(frames) / max(frames, 1)
    quats = np.empty((frames, n_bones, 4))
    for b in range(n_bones):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        amp = rng.uniform(0.1, 0.5)
        freq = rng.choice([0.5, 1.0, 2.0])
        phase = rng.uniform(0.0, 2.0 * np.pi)
        angles = amp * np.sin(2.0 * np.pi * freq * t + phase)
        quats[:, b, :] = quat.from_axis_angle(axis, angles)
    base = np.array([rng.uniform(-0.3, 0.3), rng.uniform(0.8, 1.2),
                     rng.uniform(3.5, 4.5)])
    drift = 0.15 * np.sin(2.0 * np.pi * t[:, None] + rng.uniform(0, 2 * np.pi, 3))
    return OrientationSequence(root_positions=base + drift, quats=quats)


def _sample_camera(rng):
    f = rng.uniform(900.0, 1100.0)
    axis = rng.normal(size=3)
    angle = rng.uniform(0.0, 0.05)
    return Camera(
        fx=f, fy=f, cx=500.0, cy=500.0,
        rotation=quat.from_axis_angle(axis, angle),
        translation=np.zeros(3),
    )


def synth_sample(skel, seed, frames=24):
    """One deterministic sample; the 2D data is exactly the projection of
    the forward-kinematics positions."""
    rng = np.random.default_rng(seed)
    orientations = _sample_orientations(rng, skel.n_bones, frames)
    camera = _sample_camera(rng)
    joints3d = fk_sequence(orientations, skel)
    pose = Pose2DSequence(coords=project_to_2d(joints3d, camera))
    rots = compute_2d_rotations(pose, skel)
    return SyntheticSample(
        pose=pose, rots=rots, orientations=orientations, camera=camera, seed=seed
    )


def synth_dataset(n, skel, seed, frames=24):
    """n samples with per-sample seeds derived from ``seed``."""
    out = []
    for i in range(n):
        child = np.random.SeedSequence(entropy=seed, spawn_key=(i,))
        out.append(synth_sample(skel, child, frames=frames))
    return out


def training_items(samples):
    """(pose, rots, target, depths) tuples for the training loop."""
    return [(s.pose, s.rots, s.orientations, s.depths()) for s in samples]
