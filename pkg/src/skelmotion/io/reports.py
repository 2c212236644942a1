"""CSV reports for interpolation comparisons."""

import numpy as np

from .. import kernels

REPORT_FORMAT = "skelmotion-aad-csv/1"
_CANONICAL = ("original", "pi", "pwpi", "dsi")


def aad_curve(seq, weights=None):
    """Per-frame weighted mean angular distance to the identity pose."""
    q = seq.quats
    nb = q.shape[1]
    if weights is None:
        w = np.full(nb, 1.0 / nb)
    else:
        w = np.asarray(weights, dtype=np.float64)
        w = w / w.sum()
    ident = np.zeros_like(q)
    ident[..., 0] = 1.0
    return kernels.quat_angular_distance(q, ident) @ w


def emit_aad_report(sequences, weights=None):
    """CSV with one AAD column per labelled sequence.

    ``sequences`` maps labels to OrientationSequences; the canonical
    labels original/pi/pwpi/dsi come first in that order, anything else
    alphabetically after. Sequences of different lengths leave trailing
    cells empty. The first line carries the format tag.
    """
    labels = [l for l in _CANONICAL if l in sequences]
    labels += sorted(k for k in sequences if k not in _CANONICAL)
    if not labels:
        raise ValueError("no sequences to report")
    curves = {l: aad_curve(sequences[l], weights) for l in labels}
    depth = max(c.shape[0] for c in curves.values())
    lines = [f"# {REPORT_FORMAT}"]
    lines.append(",".join(["frame"] + [f"aad_{l}" for l in labels]))
    for f in range(depth):
        row = [str(f)]
        for l in labels:
            c = curves[l]
            row.append(repr(float(c[f])) if f < c.shape[0] else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
