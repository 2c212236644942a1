"""File formats, ingestion, synthetic data, and export."""

from .bvh import euler_zxy_to_quat, export_bvh, quat_to_euler_zxy
from .keypoints import (
    KeypointFile,
    KeypointFrame,
    convert_coco_wholebody,
    dump_keypoints,
    load_keypoints,
    to_pose2d,
)
from .qseq import dump_qseq, load_qseq, read_qseq, write_qseq
from .reports import aad_curve, emit_aad_report
from .res import apply_res, res_indices
from .synth import SyntheticSample, synth_dataset, synth_sample, training_items

__all__ = [
    "KeypointFile",
    "KeypointFrame",
    "SyntheticSample",
    "aad_curve",
    "apply_res",
    "convert_coco_wholebody",
    "dump_keypoints",
    "dump_qseq",
    "emit_aad_report",
    "euler_zxy_to_quat",
    "export_bvh",
    "load_keypoints",
    "load_qseq",
    "quat_to_euler_zxy",
    "read_qseq",
    "res_indices",
    "synth_dataset",
    "synth_sample",
    "to_pose2d",
    "training_items",
    "write_qseq",
]
