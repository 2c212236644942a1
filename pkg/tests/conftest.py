import numpy as np
import pytest

import skelmotion
from skelmotion import quat

CHAIN3_CONFIG = """\
format skel/1
variant chain3
joint pelvis - 0 0 0 0
joint spine pelvis 1 0 0 1.0
joint neck spine 1 0 0 1.0
"""

TOY5_CONFIG = """\
format skel/1
variant toy5
joint pelvis - 0 0 0 0
joint spine pelvis 0 1 0 0.3
joint head spine 0 1 0 0.2
joint arm_l spine 1 0 0 0.25
joint arm_r spine -1 0 0 0.25
"""


@pytest.fixture(scope="session")
def chain3():
    return skelmotion.load_skeleton(CHAIN3_CONFIG)


@pytest.fixture(scope="session")
def toy5():
    return skelmotion.load_skeleton(TOY5_CONFIG)


@pytest.fixture(scope="session")
def whole_body():
    return skelmotion.builtin_skeleton("whole_body")


@pytest.fixture(scope="session")
def major_part():
    return skelmotion.builtin_skeleton("major_part")


def random_unit_quats(rng, shape):
    q = rng.normal(size=tuple(shape) + (4,))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def smooth_sequence(seed, frames, bones, amp=(0.1, 0.5), periods=(30, 60)):
    """Continuous single-axis-per-bone motion; steps stay well below the
    default segmentation threshold."""
    rng = np.random.default_rng(seed)
    t = np.arange(frames, dtype=float)
    quats = np.empty((frames, bones, 4))
    axes = rng.normal(size=(bones, 3))
    for b in range(bones):
        a = rng.uniform(*amp)
        period = rng.uniform(*periods)
        phase = rng.uniform(0, 2 * np.pi)
        quats[:, b, :] = quat.from_axis_angle(axes[b], a * np.sin(2 * np.pi * t / period + phase))
    roots = 0.1 * rng.normal(size=3) + 0.05 * np.sin(
         2 * np.pi * t[:, None] / frames + rng.uniform(0, 6, 3))
    return skelmotion.OrientationSequence(root_positions=roots, quats=quats)


def planted_jump_sequence(seed, frames=40, bones=5, threshold=0.3, jump_scale=2.0):
    """Quiet base motion with rotations of ``jump_scale * threshold``
    composed at random positions; returns (sequence, 0-based jump frames).

    Each planted jump rotates every bone by the same angle about its own
    axis, so the weighted mean frame distance equals the planted angle.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(frames, dtype=float)
    angles = np.zeros((frames, bones))
    for b in range(bones):
        angles[:, b] = 0.02 * np.sin(2 * np.pi * t / rng.uniform(30, 60) + rng.uniform(0, 6))
    axes = rng.normal(size=(bones, 3))
    quats = np.stack(
        [quat.from_axis_angle(axes[b], angles[:, b]) for b in range(bones)], axis=1
    )
    n_jumps = int(rng.integers(1, 4))
    pos = np.sort(rng.choice(np.arange(4, frames - 3), size=n_jumps, replace=False))
    pos = pos[np.concatenate(([True], np.diff(pos) >= 3))]
    for p in pos:
        extra = quat.from_axis_angle(axes, np.full(bones, jump_scale * threshold))
        quats[p:] = quat.multiply(extra[None], quats[p:])
    seq = skelmotion.OrientationSequence(
        root_positions=np.zeros((frames, 3)), quats=quats
    )
    return seq, pos


def fig4_sequences(seed=0):
    """A continuous motion, its 1-in-5 extraction, and five segments of
    that extraction concatenated into a discontinuous sequence.

    The motion carries a sharp localised peak (covered by segment three)
    on top of slow base oscillations, so the comparison between exact
    segment-aware interpolation and window smoothing is visible in the
    per-frame angular distance curves.
    """
    rng = np.random.default_rng(seed)
    frames, bones = 400, 6
    t = np.arange(frames, dtype=float)
    angles = np.zeros((frames, bones))
    for b in range(bones):
        period = rng.uniform(90, 150)
        amp = rng.uniform(0.4, 0.8)
        phase = rng.uniform(0, 2 * np.pi)
        angles[:, b] = amp * np.sin(2 * np.pi * t / period + phase)
    bump = 1.5 * np.exp(-((t - 200.0) ** 2) / (2 * 8.0 ** 2))
    for b in (0, 1, 2):
        angles[:, b] += bump
    axes = rng.normal(size=(bones, 3))
    quats = np.stack(
        [quat.from_axis_angle(axes[b], angles[:, b]) for b in range(bones)], axis=1
    )
    cont = skelmotion.OrientationSequence(
        root_positions=np.zeros((frames, 3)), quats=quats
    )
    extracted_idx = np.arange(0, frames, 5)
    seg_bounds = [(0, 10), (14, 26), (36, 50), (52, 62), (66, 79)]
    keep = np.concatenate([np.arange(a, b) for a, b in seg_bounds])
    orig_idx = extracted_idx[keep]
    assert 200 in orig_idx
    orig = skelmotion.OrientationSequence(
        root_positions=np.zeros((len(orig_idx), 3)), quats=quats[orig_idx]
    )
    return cont, orig
