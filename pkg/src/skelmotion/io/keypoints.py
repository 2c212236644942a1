"""2D keypoint ingestion.

The keypoint file is JSON::

    {"format": "skelmotion-kpt/1", "fps": 30.0, "source": "tag",
     "frames": [{"t": 0, "joints": {"pelvis": [u, v, conf], ...}}, ...]}

Frame ids are integers at the stated rate. Missing frame ids become gaps;
a joint whose confidence falls below the floor counts as missing in that
frame. Ingestion never fills anything in.

``convert_coco_wholebody`` maps the 133-keypoint whole-body layout
(17 body + 6 feet + 68 face + 42 hand points) onto the 54-joint skeleton
shipped with this package. The mapping is an approximation:

- pelvis, spine_lower, spine_upper, chest, neck are placed on the
  hip-midpoint to shoulder-midpoint axis at fixed fractions (0, 1/3, 2/3,
  1) and the head on the nose,
- collar joints are placed halfway between the shoulder midpoint and each
  shoulder; wrists, elbows, knees, ankles map directly,
- foot joints sit halfway between ankle and big toe, toes on the big-toe
  points,
- finger joints 1..3 take hand landmarks 1..3 (thumb) and 5..7 / 9..11 /
  13..15 / 17..19 for index/middle/ring/pinky,
- confidence of a derived point is the minimum over its sources.
"""

import json
from dataclasses import dataclass

import numpy as np

from ..skeleton import Pose2DSequence

FORMAT = "skelmotion-kpt/1"


@dataclass(frozen=True)
class KeypointFrame:
    t: int
    joints: dict          # name -> (u, v, confidence)


@dataclass(frozen=True)
class KeypointFile:
    fps: float
    source: str
    frames: tuple         # KeypointFrame, time-ordered
    gaps: tuple           # (start, end) inclusive spans of missing frame ids

    @property
    def n_frames(self):
        return len(self.frames)


def load_keypoints(text, skel=None, confidence_floor=0.3):
    """Parse a keypoint file; low-confidence entries are dropped as missing.

    With a skeleton, joint names are validated against it. Raises on
    duplicate or non-monotonic frame ids.
    """
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a keypoint file (want format {FORMAT!r})")
    frames = []
    last_t = None
    for entry in doc.get("frames", []):
        t = int(entry["t"])
        if last_t is not None:
            if t == last_t:
                raise ValueError(f"duplicate timestamp {t}")
            if t < last_t:
                raise ValueError(f"non-monotonic timestamp {t} after {last_t}")
        last_t = t
        joints = {}
        for name, uvc in entry["joints"].items():
            if skel is not None and name not in skel.joint_names:
                raise ValueError(f"unknown joint name {name!r} at frame {t}")
            u, v, conf = float(uvc[0]), float(uvc[1]), float(uvc[2])
            if conf >= confidence_floor:
                joints[name] = (u, v, conf)
        frames.append(KeypointFrame(t=t, joints=joints))

    gaps = []
    for a, b in zip(frames, frames[1:]):
        if b.t > a.t + 1:
            gaps.append((a.t + 1, b.t - 1))
    return KeypointFile(
        fps=float(doc.get("fps", 30.0)),
        source=str(doc.get("source", "")),
        frames=tuple(frames),
        gaps=tuple(gaps),
    )


def dump_keypoints(frames, fps=30.0, source=""):
    """Serialise (t, {name: (u, v, conf)}) pairs to keypoint-file JSON."""
    doc = {
        "format": FORMAT,
        "fps": fps,
        "source": source,
        "frames": [
            {"t": int(t), "joints": {n: list(map(float, uvc)) for n, uvc in joints.items()}}
            for t, joints in frames
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def to_pose2d(kf, skel):
    """Complete frames as a Pose2DSequence plus their frame ids.

    A frame is complete when every skeleton joint survived the confidence
    floor. Raises if no frame is complete.
    """
    rows = []
    kept = []
    for frame in kf.frames:
        if all(n in frame.joints for n in skel.joint_names):
            rows.append([frame.joints[n][:2] for n in skel.joint_names])
            kept.append(frame.t)
    if not rows:
        raise ValueError("no complete frames after confidence filtering")
    return Pose2DSequence(coords=np.asarray(rows, dtype=np.float64)), kept


# COCO-WholeBody indices used by the converter
_BODY = {
    "nose": 0, "l_shoulder": 5, "r_shoulder": 6, "l_elbow": 7, "r_elbow": 8,
    "l_wrist": 9, "r_wrist": 10, "l_hip": 11, "r_hip": 12, "l_knee": 13,
    "r_knee": 14, "l_ankle": 15, "r_ankle": 16,
}
_FEET = {"l_big_toe": 17, "r_big_toe": 20}
_HAND_BASE = {"l": 91, "r": 112}
_FINGER_OFFSETS = {"thumb": (1, 2, 3), "index": (5, 6, 7), "middle": (9, 10, 11),
                   "ring": (13, 14, 15), "pinky": (17, 18, 19)}


def convert_coco_wholebody(points):
    """Map one frame of 133 (u, v, conf) rows to named whole-body joints.

    Returns {joint_name: (u, v, conf)} for the 54-joint skeleton. See the
    module docstring for the selection and midpoint rules.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.shape != (133, 3):
        raise ValueError("expected (133, 3) keypoints")

    def mid(i, j):
        return (
            (p[i, 0] + p[j, 0]) / 2.0,
            (p[i, 1] + p[j, 1]) / 2.0,
            min(p[i, 2], p[j, 2]),
        )

    def lerp(a, b, t):
        return (
            a[0] * (1 - t) + b[0] * t,
            a[1] * (1 - t) + b[1] * t,
            min(a[2], b[2]),
        )

    out = {}
    hips = mid(_BODY["l_hip"], _BODY["r_hip"])
    shoulders = mid(_BODY["l_shoulder"], _BODY["r_shoulder"])
    out["pelvis"] = hips
    out["spine_lower"] = lerp(hips, shoulders, 1.0 / 3.0)
    out["spine_upper"] = lerp(hips, shoulders, 2.0 / 3.0)
    out["chest"] = shoulders
    out["neck"] = lerp(shoulders, tuple(p[_BODY["nose"]]), 0.5)
    out["head"] = tuple(p[_BODY["nose"]])
    for s in ("l", "r"):
        out[f"collar_{s}"] = lerp(shoulders, tuple(p[_BODY[f"{s}_shoulder"]]), 0.5)
        out[f"shoulder_{s}"] = tuple(p[_BODY[f"{s}_shoulder"]])
        out[f"elbow_{s}"] = tuple(p[_BODY[f"{s}_elbow"]])
        out[f"wrist_{s}"] = tuple(p[_BODY[f"{s}_wrist"]])
        out[f"hip_{s}"] = tuple(p[_BODY[f"{s}_hip"]])
        out[f"knee_{s}"] = tuple(p[_BODY[f"{s}_knee"]])
        out[f"ankle_{s}"] = tuple(p[_BODY[f"{s}_ankle"]])
        out[f"foot_{s}"] = lerp(tuple(p[_BODY[f"{s}_ankle"]]),
                                tuple(p[_FEET[f"{s}_big_toe"]]), 0.5)
        out[f"toe_{s}"] = tuple(p[_FEET[f"{s}_big_toe"]])
        base = _HAND_BASE[s]
        for finger, offs in _FINGER_OFFSETS.items():
            for k, off in enumerate(offs, start=1):
                out[f"{finger}_{s}_{k}"] = tuple(p[base + off])
    return {name: (float(u), float(v), float(c)) for name, (u, v, c) in out.items()}
