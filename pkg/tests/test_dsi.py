import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import skelmotion
from skelmotion import dsi, quat
from skelmotion.dsi import InterpolationParams, baseline_pi, baseline_pwpi
from skelmotion.io.reports import aad_curve
from skelmotion.skeleton import OrientationSequence

from conftest import fig4_sequences, planted_jump_sequence, smooth_sequence


def single_axis_sequence(angles, axis=(0, 0, 1)):
    """(F, B) angles -> OrientationSequence about a fixed axis."""
    angles = np.asarray(angles, dtype=float)
    f, b = angles.shape
    quats = quat.from_axis_angle(np.array(axis, dtype=float), angles)
    return OrientationSequence(root_positions=np.zeros((f, 3)), quats=quats)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            InterpolationParams(delta=0.0)
        with pytest.raises(ValueError):
            InterpolationParams(delta=1.5)
        with pytest.raises(ValueError):
            InterpolationParams(threshold=-1.0)
        with pytest.raises(ValueError):
            InterpolationParams(variants=0)
        with pytest.raises(ValueError):
            InterpolationParams(bone_weights=(-0.5, 1.5))


class TestFrameDistance:
    def test_identical_adjacent_frames(self):
        seq = single_axis_sequence(np.zeros((3, 2)))
        assert dsi.frame_distance(seq, 2) == 0.0

    def test_single_bone_quarter_turn(self):
        seq = single_axis_sequence(np.array([[0.0], [np.pi / 2]]))
        assert dsi.frame_distance(seq, 2) == pytest.approx(np.pi / 2, abs=1e-12)

    def test_weighted_mean_two_bones(self):
        seq = single_axis_sequence(np.array([[0.0, 0.0], [0.0, np.pi / 2]]))
        assert dsi.frame_distance(seq, 2) == pytest.approx(np.pi / 4, abs=1e-12)

    def test_weights_normalised(self):
        seq = single_axis_sequence(np.array([[0.0, 0.0], [0.0, np.pi / 2]]))
        d = dsi.frame_distance(seq, 2, weights=[3.0, 1.0])
        assert d == pytest.approx(np.pi / 8, abs=1e-12)

    def test_out_of_range(self):
        seq = single_axis_sequence(np.zeros((3, 1)))
        with pytest.raises(ValueError):
            dsi.frame_distance(seq, 1)
        with pytest.raises(ValueError):
            dsi.frame_distance(seq, 4)


class TestSegment:
    def test_constant_sequence_single_interval(self):
        seq = single_axis_sequence(np.zeros((10, 2)))
        assert dsi.segment(seq, InterpolationParams()) == [(1, 10, "normal")]

    def test_single_jump_boundaries(self):
        angles = np.zeros((12, 1))
        angles[6:] = 0.8
        seq = single_axis_sequence(angles)
        got = dsi.segment(seq, InterpolationParams(threshold=0.3))
        assert got == [(1, 6, "normal"), (6, 7, "edge"), (7, 12, "normal")]

    def test_every_step_above_threshold(self):
        angles = np.cumsum(np.full((5, 1), 0.8), axis=0)
        seq = single_axis_sequence(angles)
        got = dsi.segment(seq, InterpolationParams(threshold=0.3))
        assert got == [(1, 2, "edge"), (2, 3, "edge"), (3, 4, "edge"), (4, 5, "edge")]

    def test_planted_jumps_recovered(self):
        for seed in range(20):
            seq, pos = planted_jump_sequence(seed)
            found = sorted(a for a, b, k in dsi.segment(seq, InterpolationParams())
                           if k == "edge")
            assert found == sorted(int(p) for p in pos)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_tiling_property(self, seed):
        rng = np.random.default_rng(seed)
        f = int(rng.integers(2, 40))
        angles = np.cumsum(rng.normal(0, 0.3, (f, 2)), axis=0)
        seq = single_axis_sequence(angles)
        ivs = dsi.segment(seq, InterpolationParams())
        assert ivs[0][0] == 1
        assert ivs[-1][1] == f
        for (a0, b0, _), (a1, b1, _) in zip(ivs, ivs[1:]):
            assert b0 == a1        # shared boundary frame, no gap, no overlap
        for a, b, kind in ivs:
            assert a < b
            if kind == "edge":
                assert b == a + 1


class TestLagrangeSegment:
    def test_constant_channels(self):
        vals = np.full((4, 2, 4), 0.5)
        grid = np.linspace(1, 4, 13)
        out = dsi.lagrange_segment(vals, np.arange(1.0, 5.0), grid)
        assert np.allclose(out, 0.5, atol=1e-12)

    def test_exact_quadratic(self):
        nodes = np.array([0.0, 1.0, 2.0])
        vals = (nodes ** 2).reshape(3, 1)
        out = dsi.lagrange_segment(vals, nodes, np.array([1.5]))
        assert out[0, 0] == pytest.approx(2.25, abs=1e-12)

    def test_node_exactness(self):
        rng = np.random.default_rng(0)
        nodes = np.arange(1.0, 6.0)
        vals = rng.normal(size=(5, 3, 4))
        grid = np.concatenate([nodes, np.linspace(1, 5, 7)])
        out = dsi.lagrange_segment(vals, nodes, grid)
        assert np.abs(out[:5] - vals).max() < 1e-9

    def test_chunked_long_interval_still_exact_at_nodes(self):
        rng = np.random.default_rng(1)
        nodes = np.arange(1.0, 15.0)
        vals = rng.normal(size=(14, 2))
        out = dsi.lagrange_segment(vals, nodes, nodes, max_nodes=6)
        assert np.abs(out - vals).max() < 1e-9

    def test_too_short(self):
        with pytest.raises(ValueError):
            dsi.lagrange_segment(np.zeros((1, 2)), np.array([1.0]), np.array([1.0]))


class TestRandomVariants:
    def test_single_variant_passthrough(self):
        seq = smooth_sequence(0, 12, 3)
        res = dsi.dsi(seq, InterpolationParams(variants=1))
        assert res.n_variants == 1

    def test_variant_zero_unchanged_by_sigma(self):
        seq = smooth_sequence(1, 12, 3)
        a = dsi.dsi(seq, InterpolationParams(variants=3, seed=5))
        b = dsi.dsi(seq, InterpolationParams(variants=1, seed=9))
        assert np.array_equal(a.sequences[0].quats, b.sequences[0].quats)

    def test_equal_lengths_across_variants(self):
        seq, _ = planted_jump_sequence(3)
        res = dsi.dsi(seq, InterpolationParams(variants=4, seed=2))
        lengths = {s.frames for s in res.sequences}
        assert lengths == {res.frames}

    def test_deterministic_under_seed(self):
        seq = smooth_sequence(2, 14, 3)
        p = InterpolationParams(variants=3, seed=17)
        a = dsi.dsi(seq, p)
        b = dsi.dsi(seq, p)
        for s, t in zip(a.sequences, b.sequences):
            assert np.array_equal(s.quats, t.quats)
            assert np.array_equal(s.root_positions, t.root_positions)

    def test_different_seeds_differ(self):
        seq = smooth_sequence(2, 14, 3)
        a = dsi.dsi(seq, InterpolationParams(variants=2, seed=1))
        b = dsi.dsi(seq, InterpolationParams(variants=2, seed=2))
        assert not np.array_equal(a.sequences[1].quats, b.sequences[1].quats)


class TestRenormalize:
    def test_plain_normalisation(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=(8, 2, 4)) * 2.0
        out = dsi.renormalize(q)
        assert np.abs(np.linalg.norm(out, axis=-1) - 1.0).max() < 1e-12

    def test_degenerate_frames_reseeded_by_slerp(self):
        q = np.tile(quat.IDENTITY, (5, 1, 1)).astype(float)
        q[1:4, 0] = [1e-3, 0, 0, 0]   # collapsed norms mid-sequence
        q[4, 0] = quat.from_axis_angle([0, 0, 1], 0.2)
        out = dsi.renormalize(q)
        want = quat.slerp(quat.IDENTITY, q[4, 0], 0.5)   # healthy at 0 and 4
        assert quat.angular_distance(out[2, 0], want) < 1e-9

    def test_degenerate_endpoint_copies_neighbour(self):
        q = np.tile(quat.from_axis_angle([0, 1, 0], 0.3), (4, 1, 1))
        q[0, 0] = [0.0, 1e-4, 0.0, 0.0]
        out = dsi.renormalize(q)
        assert quat.angular_distance(out[0, 0], out[1, 0]) < 1e-12


class TestDsiPipeline:
    def test_constant_sequence_stays_constant(self):
        seq = single_axis_sequence(np.full((10, 2), 0.3))
        res = dsi.dsi(seq, InterpolationParams(delta=0.2))
        assert res.frames == 46         # 9 gaps * 5 + 1 samples
        d = quat.angular_distance(
            res.sequences[0].quats,
            np.broadcast_to(seq.quats[0], res.sequences[0].quats.shape),
        )
        assert d.max() < 1e-9

    def test_upsampling_rate(self):
        seq = smooth_sequence(3, 10, 2)
        res = dsi.dsi(seq, InterpolationParams(delta=0.2))
        assert res.frames == 46

    def test_output_quats_unit(self):
        seq, _ = planted_jump_sequence(5)
        res = dsi.dsi(seq, InterpolationParams(variants=3, seed=1))
        for s in res.sequences:
            assert np.abs(np.linalg.norm(s.quats, axis=-1) - 1.0).max() < 1e-6

    def test_monotone_abscissae_with_keyframes(self):
        seq, _ = planted_jump_sequence(6)
        res = dsi.dsi(seq, InterpolationParams())
        assert np.all(np.diff(res.abscissae) > 0)
        assert len(res.keyframe_indices) == seq.frames
        assert np.array_equal(res.abscissae[res.keyframe_indices],
                              np.arange(1.0, seq.frames + 1.0))

    def test_keyframes_preserved_within_tolerance(self):
        seq, _ = planted_jump_sequence(7)
        params = InterpolationParams()
        res = dsi.dsi(seq, params)
        assert res.max_keyframe_error < params.keyframe_tolerance

    def test_edge_interval_point_count_formula(self):
        angles = np.zeros((12, 1))
        angles[6:] = 0.8
        seq = single_axis_sequence(angles)
        params = InterpolationParams(threshold=0.3, delta=0.2, eta=25.0)
        res = dsi.dsi(seq, params)
        d = dsi.frame_distances(seq.quats)[5]
        expected_edge = max(2, int(params.eta * d / params.delta))
        # total samples: normal [1,6] + edge [6,7] + normal [7,12], shared ends
        want = (5 * 5 + 1) + (expected_edge - 1) + (5 * 5 - 1) + 1
        assert res.frames == want

    def test_too_short_input(self):
        seq = single_axis_sequence(np.zeros((1, 1)))
        with pytest.raises(ValueError):
            dsi.dsi(seq, InterpolationParams())

    def test_fig4_construction_peaks_survive(self):
        cont, orig = fig4_sequences(0)
        res = dsi.dsi(orig, InterpolationParams())
        peak_cont = aad_curve(cont).max()
        peak_dsi = aad_curve(res.sequences[0]).max()
        assert abs(peak_dsi - peak_cont) / peak_cont < 0.10


class TestBaselines:
    def test_constant_input_both(self):
        seq = single_axis_sequence(np.full((12, 2), 0.4))
        pi_seq, bounds = baseline_pi(seq)
        pw_seq = baseline_pwpi(seq)
        base = np.broadcast_to(seq.quats[0], pi_seq.quats.shape)
        assert quat.angular_distance(pi_seq.quats, base).max() < 1e-9
        base = np.broadcast_to(seq.quats[0], pw_seq.quats.shape)
        assert quat.angular_distance(pw_seq.quats, base).max() < 1e-9

    def test_pi_has_no_boundaries(self):
        seq, _ = planted_jump_sequence(8)
        _, bounds = baseline_pi(seq)
        assert bounds == []

    def test_pwpi_damps_peaks_below_dsi(self):
        cont, orig = fig4_sequences(0)
        p0 = aad_curve(orig).max()
        res = dsi.dsi(orig, InterpolationParams())
        pw = baseline_pwpi(orig)
        pres_dsi = aad_curve(res.sequences[0]).max() / p0
        pres_pw = aad_curve(pw).max() / p0
        assert pres_pw < pres_dsi

    def test_pwpi_window_validation(self):
        seq = single_axis_sequence(np.zeros((12, 1)))
        with pytest.raises(ValueError):
            baseline_pwpi(seq, window=3, degree=3)
