"""Random extraction: simulate discontinuous video by keeping ~10% of
frames.

Step one keeps one frame in every five (ids 0, 5, 10, ...). Step two
keeps exactly half of those, arranged as runs of at least two consecutive
kept grid slots so no survivor is isolated from both its grid neighbours.
"""

import numpy as np

from ..skeleton import OrientationSequence


def res_indices(n_frames, seed):
    """Kept frame indices (sorted, 0-based) for an n-frame sequence."""
    if n_frames < 10:
        raise ValueError("sequence shorter than 10 frames")
    grid = np.arange(0, n_frames, 5)
    n_grid = grid.shape[0]
    # exactly half, but never below one run of two (very short inputs)
    m = max(2, int(n_grid / 2 + 0.5))
    rng = np.random.default_rng(seed)

    runs = []
    remaining = m
    while remaining:
        hi = min(6, remaining)
        choices = [l for l in range(2, hi + 1) if remaining - l != 1]
        run = int(rng.choice(choices))
        runs.append(run)
        remaining -= run
    k = len(runs)

    extra = (n_grid - m) - (k - 1)
    counts = rng.multinomial(extra, np.full(k + 1, 1.0 / (k + 1)))
    gaps = [int(counts[0])] + [1 + int(c) for c in counts[1:k]] + [int(counts[k])]

    kept = []
    pos = gaps[0]
    for run, gap in zip(runs, gaps[1:]):
        kept.extend(range(pos, pos + run))
        pos += run + gap
    return grid[np.array(kept, dtype=np.intp)]


def apply_res(seq, seed):
    """Extract an OrientationSequence; returns (sequence, kept_indices)."""
    idx = res_indices(seq.frames, seed)
    return (
        OrientationSequence(
            root_positions=seq.root_positions[idx], quats=seq.quats[idx]
        ),
        idx,
    )
