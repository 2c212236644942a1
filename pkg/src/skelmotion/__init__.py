"""skelmotion: lift 2D human pose sequences to bone-joint orientations and
repair or augment discontinuous orientation sequences by dynamic skeletal
interpolation."""

from importlib import resources

from .skeleton import (
    Camera,
    OrientationSequence,
    Pose2DSequence,
    Rotation2DSequence,
    Skeleton,
    SkeletonError,
    compute_2d_rotations,
    forward_kinematics,
    fk_sequence,
    load_skeleton,
    project_to_2d,
)

__version__ = "0.1.0"


def builtin_skeleton(name):
    """Load a skeleton shipped with the package: 'whole_body' (54 joints)
    or 'major_part' (17 joints)."""
    path = resources.files("skelmotion").joinpath("data", f"{name}.skel")
    return load_skeleton(path.read_text())


__all__ = [
    "Camera",
    "OrientationSequence",
    "Pose2DSequence",
    "Rotation2DSequence",
    "Skeleton",
    "SkeletonError",
    "builtin_skeleton",
    "compute_2d_rotations",
    "fk_sequence",
    "forward_kinematics",
    "load_skeleton",
    "project_to_2d",
    "__version__",
]
