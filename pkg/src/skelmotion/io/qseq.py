"""Quaternion sequence file: plain-text, versioned, byte-stable.

Layout::

    skelmotion-qseq/1
    frames <F>
    bones <B>
    skeleton <16-hex hash or ->
    fps <rate>
    data
    <root x y z> <w x y z> * B        one line per frame

Floats are written with ``repr`` so parsing returns the exact values.
"""

import numpy as np

from ..skeleton import OrientationSequence

FORMAT = "skelmotion-qseq/1"


def dump_qseq(seq, skeleton_hash=None, fps=30.0):
    lines = [
        FORMAT,
        f"frames {seq.frames}",
        f"bones {seq.n_bones}",
        f"skeleton {skeleton_hash if skeleton_hash else '-'}",
        f"fps {fps!r}",
        "data",
    ]
    for f in range(seq.frames):
        row = [repr(float(v)) for v in seq.root_positions[f]]
        row.extend(repr(float(v)) for v in seq.quats[f].reshape(-1))
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def load_qseq(text):
    """Parse; returns (OrientationSequence, meta) with meta = {skeleton, fps}."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT:
        raise ValueError(f"not a quaternion sequence file (want header {FORMAT!r})")
    meta = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "data":
        key, _, value = lines[i].partition(" ")
        meta[key.strip()] = value.strip()
        i += 1
    if i >= len(lines):
        raise ValueError("missing data section")
    frames = int(meta["frames"])
    bones = int(meta["bones"])
    rows = [ln for ln in lines[i + 1:] if ln.strip()]
    if len(rows) != frames:
        raise ValueError(f"expected {frames} frame rows, found {len(rows)}")
    width = 3 + 4 * bones
    data = np.empty((frames, width))
    for f, row in enumerate(rows):
        vals = row.split()
        if len(vals) != width:
            raise ValueError(f"frame {f}: expected {width} values, got {len(vals)}")
        data[f] = [float(v) for v in vals]
    seq = OrientationSequence(
        root_positions=data[:, :3],
        quats=data[:, 3:].reshape(frames, bones, 4),
    )
    out_meta = {
        "skeleton": None if meta.get("skeleton", "-") == "-" else meta["skeleton"],
        "fps": float(meta.get("fps", 30.0)),
    }
    return seq, out_meta


def write_qseq(seq, path, skeleton_hash=None, fps=30.0):
    with open(path, "w") as fh:
        fh.write(dump_qseq(seq, skeleton_hash, fps))


def read_qseq(path):
    with open(path) as fh:
        return load_qseq(fh.read())
