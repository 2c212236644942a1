import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import skelmotion
from skelmotion import quat
from skelmotion.io import (
    apply_res,
    convert_coco_wholebody,
    dump_keypoints,
    dump_qseq,
    emit_aad_report,
    export_bvh,
    load_keypoints,
    load_qseq,
    res_indices,
    synth_dataset,
    synth_sample,
    to_pose2d,
)
from skelmotion.io.bvh import euler_zxy_to_quat, quat_to_euler_zxy
from skelmotion.skeleton import OrientationSequence, fk_sequence, project_to_2d

from conftest import random_unit_quats, smooth_sequence


def parse_bvh(text):
    """Test oracle: joint names in channel order plus per-frame channels."""
    lines = text.splitlines()
    names = []
    i = 0
    while lines[i].strip() != "MOTION":
        tok = lines[i].split()
        if tok and tok[0] in ("ROOT", "JOINT"):
            names.append(tok[1])
        i += 1
    n_frames = int(lines[i + 1].split(":")[1])
    frames = [np.array([float(v) for v in lines[i + 3 + f].split()])
              for f in range(n_frames)]
    return names, np.stack(frames)


def rebuild_orientations(text, skel):
    """Parse a BVH export back into (root_positions, local quats) using an
    independent Euler implementation (scipy, intrinsic ZXY)."""
    names, channels = parse_bvh(text)
    assert names[0] == skel.joint_names[skel.root]
    roots = channels[:, :3]
    quats = np.empty((channels.shape[0], skel.n_bones, 4))
    for j, name in enumerate(names[1:]):
        bone = skel.bone_index(name)
        cols = 6 + 3 * j
        zxy = channels[:, cols:cols + 3]
        r = Rotation.from_euler("ZXY", zxy, degrees=True)
        quats[:, bone, :] = np.roll(r.as_quat(), 1, axis=-1)
    return roots, quats


class TestQseqFormat:
    def test_round_trip_exact(self):
        seq = smooth_sequence(0, 8, 3)
        text = dump_qseq(seq, "abcd1234", 25.0)
        back, meta = load_qseq(text)
        assert np.array_equal(back.quats, seq.quats)
        assert np.array_equal(back.root_positions, seq.root_positions)
        assert meta == {"skeleton": "abcd1234", "fps": 25.0}

    def test_byte_stable(self):
        seq = smooth_sequence(1, 5, 2)
        assert dump_qseq(seq) == dump_qseq(seq)

    def test_bad_header(self):
        with pytest.raises(ValueError, match="header"):
            load_qseq("not-a-qseq\n")

    def test_row_count_mismatch(self):
        seq = smooth_sequence(0, 3, 1)
        text = dump_qseq(seq)
        clipped = "\n".join(text.splitlines()[:-1]) + "\n"
        with pytest.raises(ValueError, match="frame rows"):
            load_qseq(clipped)


class TestKeypoints:
    def _file(self, skel, n=10, drop=(), low_conf=()):
        frames = []
        rng = np.random.default_rng(0)
        for t in range(n):
            if t in drop:
                continue
            joints = {}
            for name in skel.joint_names:
                conf = 0.05 if (t, name) in low_conf else 0.9
                joints[name] = (float(rng.uniform(0, 100)),
                                float(rng.uniform(0, 100)), conf)
            frames.append((t, joints))
        return dump_keypoints(frames, fps=30.0, source="test")

    def test_complete_file_no_gaps(self, toy5):
        kf = load_keypoints(self._file(toy5), skel=toy5)
        assert kf.n_frames == 10
        assert kf.gaps == ()

    def test_gaps_reported_not_filled(self, toy5):
        kf = load_keypoints(self._file(toy5, drop={3, 4, 7}), skel=toy5)
        assert kf.gaps == ((3, 4), (7, 7))
        assert kf.n_frames == 7       # never invents frames

    def test_res_derived_gap_report(self, toy5):
        n = 200
        kept = set(res_indices(n, seed=4).tolist())
        kf = load_keypoints(self._file(toy5, n=n, drop=set(range(n)) - kept),
                            skel=toy5)
        spans = []
        run = None
        for t in range(min(kept), max(kept) + 1):
            if t not in kept:
                run = (t, t) if run is None else (run[0], t)
            elif run:
                spans.append(run)
                run = None
        assert kf.gaps == tuple(spans)

    def test_low_confidence_marks_joint_missing(self, toy5):
        text = self._file(toy5, low_conf={(2, "head")})
        kf = load_keypoints(text, skel=toy5)
        assert "head" not in kf.frames[2].joints
        pose, kept = to_pose2d(kf, toy5)
        assert 2 not in kept
        assert pose.frames == 9

    def test_unknown_joint_rejected(self, toy5):
        doc = json.loads(self._file(toy5))
        doc["frames"][0]["joints"]["mystery"] = [0.0, 0.0, 1.0]
        with pytest.raises(ValueError, match="unknown joint"):
            load_keypoints(json.dumps(doc), skel=toy5)

    def test_duplicate_timestamp_rejected(self, toy5):
        doc = json.loads(self._file(toy5))
        doc["frames"][1]["t"] = doc["frames"][0]["t"]
        with pytest.raises(ValueError, match="duplicate"):
            load_keypoints(json.dumps(doc))

    def test_non_monotonic_rejected(self, toy5):
        doc = json.loads(self._file(toy5))
        doc["frames"][1]["t"] = -5
        with pytest.raises(ValueError, match="non-monotonic"):
            load_keypoints(json.dumps(doc))

    def test_coco_wholebody_conversion_covers_skeleton(self, whole_body):
        rng = np.random.default_rng(1)
        pts = np.column_stack([rng.uniform(0, 640, 133), rng.uniform(0, 480, 133),
                               rng.uniform(0.5, 1.0, 133)])
        named = convert_coco_wholebody(pts)
        assert set(named) == set(whole_body.joint_names)


class TestRes:
    def test_thousand_frames_ten_percent(self):
        for seed in range(100):
            idx = res_indices(1000, seed)
            assert abs(len(idx) - 100) <= 1
            grid = set((idx // 5).tolist())
            for g in grid:
                assert (g - 1 in grid) or (g + 1 in grid), "isolated singleton"

    def test_every_fifth_frame_only(self):
        idx = res_indices(500, 3)
        assert np.all(idx % 5 == 0)
        assert np.all(np.diff(idx) > 0)

    def test_deterministic(self):
        assert np.array_equal(res_indices(1000, 7), res_indices(1000, 7))

    def test_short_sequence_rejected(self):
        seq = smooth_sequence(0, 9, 1)
        with pytest.raises(ValueError, match="shorter than 10"):
            apply_res(seq, 0)

    def test_apply_returns_subsequence(self):
        seq = smooth_sequence(0, 100, 2)
        out, idx = apply_res(seq, 1)
        assert out.frames == len(idx)
        assert np.array_equal(out.quats, seq.quats[idx])


class TestSynth:
    def test_empty_dataset(self, toy5):
        assert synth_dataset(0, toy5, seed=0) == []

    def test_seeded_reproducibility(self, toy5):
        a = synth_dataset(3, toy5, seed=5, frames=8)
        b = synth_dataset(3, toy5, seed=5, frames=8)
        for s, t in zip(a, b):
            assert np.array_equal(s.pose.coords, t.pose.coords)
            assert np.array_equal(s.orientations.quats, t.orientations.quats)

    def test_construction_invariant_bit_exact(self, toy5):
        for s in synth_dataset(4, toy5, seed=9, frames=6):
            redone = project_to_2d(fk_sequence(s.orientations, toy5), s.camera)
            assert np.array_equal(s.pose.coords, redone)

    def test_depths_positive(self, toy5):
        for s in synth_dataset(4, toy5, seed=2, frames=6):
            assert np.all(s.depths() > 0)


class TestBvh:
    def test_identity_pose_all_zero_euler(self, toy5):
        seq = OrientationSequence(root_positions=np.zeros((1, 3)),
                                  quats=quat.identity((1, toy5.n_bones)))
        text = export_bvh(seq, toy5)
        _, channels = parse_bvh(text)
        assert np.array_equal(channels[0], np.zeros(6 + 3 * toy5.n_bones))

    def test_hierarchy_joint_count(self, whole_body):
        seq = OrientationSequence(root_positions=np.zeros((1, 3)),
                                  quats=quat.identity((1, whole_body.n_bones)))
        names, _ = parse_bvh(export_bvh(seq, whole_body))
        assert len(names) == whole_body.n_joints
        assert sorted(names) == sorted(whole_body.joint_names)

    def test_round_trip_random_sequences(self, toy5):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(10):
            q = random_unit_quats(rng, (20, toy5.n_bones))
            seq = OrientationSequence(root_positions=rng.normal(size=(20, 3)), quats=q)
            roots, quats = rebuild_orientations(export_bvh(seq, toy5), toy5)
            worst = max(worst, float(quat.angular_distance(quats, seq.quats).max()))
            assert np.abs(roots - seq.root_positions).max() < 1e-7
        assert worst < 1e-6

    def test_round_trip_near_gimbal_lock(self, chain3):
        eps = np.deg2rad(0.5)
        cases = []
        for sign in (1.0, -1.0):
            for e in (0.0, eps / 4, eps):
                z = quat.from_axis_angle([0, 0, 1], 0.7)
                x = quat.from_axis_angle([1, 0, 0], sign * (np.pi / 2 - e))
                y = quat.from_axis_angle([0, 1, 0], 0.3)
                cases.append(quat.multiply(quat.multiply(z, x), y))
        quats = np.stack([np.stack([c, c]) for c in cases])   # (n, 2, 4)
        seq = OrientationSequence(root_positions=np.zeros((len(cases), 3)),
                                  quats=quats)
        roots, back = rebuild_orientations(export_bvh(seq, chain3), chain3)
        assert quat.angular_distance(back, seq.quats).max() < 1e-4

    def test_euler_conversion_matches_scipy(self):
        rng = np.random.default_rng(4)
        q = random_unit_quats(rng, (500,))
        zxy = quat_to_euler_zxy(q)
        ref = Rotation.from_quat(np.roll(q, -1, axis=-1)).as_euler("ZXY")
        # scipy returns (z, x, y) for "ZXY" as well
        back_ours = euler_zxy_to_quat(zxy)
        back_ref = euler_zxy_to_quat(ref)
        assert quat.angular_distance(back_ours, q).max() < 1e-9
        assert quat.angular_distance(back_ref, q).max() < 1e-9

    def test_byte_stable(self, toy5):
        seq = smooth_sequence(5, 4, toy5.n_bones)
        assert export_bvh(seq, toy5) == export_bvh(seq, toy5)


class TestAadReport:
    def test_identity_sequence_zero_column(self):
        seq = OrientationSequence(root_positions=np.zeros((4, 3)),
                                  quats=quat.identity((4, 2)))
        csv = emit_aad_report({"original": seq})
        lines = csv.strip().splitlines()
        assert lines[1] == "frame,aad_original"
        assert all(line.endswith(",0.0") for line in lines[2:])

    def test_hand_built_two_frame_case(self):
        q = np.stack([
            quat.identity((2,)),
            np.stack([quat.from_axis_angle([0, 0, 1], 0.5),
                      quat.from_axis_angle([1, 0, 0], 1.0)]),
        ])
        seq = OrientationSequence(root_positions=np.zeros((2, 3)), quats=q)
        csv = emit_aad_report({"dsi": seq})
        rows = csv.strip().splitlines()[2:]
        assert float(rows[0].split(",")[1]) == pytest.approx(0.0, abs=1e-12)
        assert float(rows[1].split(",")[1]) == pytest.approx(0.75, abs=1e-12)

    def test_column_order_and_padding(self):
        short = OrientationSequence(root_positions=np.zeros((2, 3)),
                                    quats=quat.identity((2, 1)))
        long = OrientationSequence(root_positions=np.zeros((4, 3)),
                                   quats=quat.identity((4, 1)))
        csv = emit_aad_report({"dsi": short, "original": long, "pi": long})
        lines = csv.strip().splitlines()
        assert lines[1] == "frame,aad_original,aad_pi,aad_dsi"
        assert lines[5].split(",")[3] == ""     # short column padded
