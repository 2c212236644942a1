import numpy as np
import pytest

import skelmotion
from skelmotion.graph import (
    DEFAULT_ALPHA,
    SUBSET_CHILD,
    SUBSET_PARENT,
    SUBSET_SELF,
    AdjacencyStack,
    build_edge_partition,
    build_vertex_partition,
    normalize,
    partition_to_stack,
)


def brute_force_normalize(raw, alpha):
    """Explicit-loop oracle for deg^{-1/2} A deg^{-1/2} with row degrees."""
    k, n, _ = raw.shape
    out = np.zeros_like(raw)
    for s in range(k):
        deg = np.zeros(n)
        for i in range(n):
            for j in range(n):
                deg[i] += raw[s, i, j]
            deg[i] += alpha
        for i in range(n):
            for j in range(n):
                out[s, i, j] = raw[s, i, j] / np.sqrt(deg[i] * deg[j])
    return out


class TestPartitions:
    def test_chain_vertex_partition(self, chain3):
        part = build_vertex_partition(chain3)
        mid = chain3.joint_index("spine")
        subsets = dict((k, []) for k in range(3))
        for nbr, k in part.members[mid]:
            subsets[k].append(nbr)
        assert subsets[SUBSET_SELF] == [mid]
        assert subsets[SUBSET_PARENT] == [chain3.joint_index("pelvis")]
        assert subsets[SUBSET_CHILD] == [chain3.joint_index("neck")]

    def test_single_joint_skeleton(self):
        sk = skelmotion.load_skeleton("format skel/1\njoint pelvis - 0 0 0 0\n")
        part = build_vertex_partition(sk)
        assert part.members == (((0, SUBSET_SELF),),)
        assert list(part.cardinalities[0]) == [1, 0, 0]

    def test_edge_partition_follows_bone_tree(self, toy5):
        part = build_edge_partition(toy5)
        spine = toy5.bone_index("spine")
        children = sorted(n for n, k in part.members[spine] if k == SUBSET_CHILD)
        expected = sorted([toy5.bone_index("head"), toy5.bone_index("arm_l"),
                           toy5.bone_index("arm_r")])
        assert children == expected

    def test_row_sums_bounded_by_branching(self, whole_body):
        stack = partition_to_stack(build_vertex_partition(whole_body))
        max_children = max(
            len(whole_body.joint_children(j)) for j in range(whole_body.n_joints)
        )
        assert stack.raw[SUBSET_CHILD].sum(axis=1).max() == max_children
        assert stack.raw[SUBSET_PARENT].sum(axis=1).max() == 1

    def test_deterministic_rebuild(self, whole_body):
        a = partition_to_stack(build_edge_partition(whole_body))
        b = partition_to_stack(build_edge_partition(whole_body))
        assert np.array_equal(a.raw, b.raw)


class TestAdjacencyStack:
    def test_identity_enforced(self):
        raw = np.zeros((3, 2, 2))
        with pytest.raises(ValueError, match="identity"):
            AdjacencyStack(raw=raw)

    def test_transpose_enforced(self):
        raw = np.zeros((3, 2, 2))
        raw[0] = np.eye(2)
        raw[1, 0, 1] = 1.0
        with pytest.raises(ValueError, match="transpose"):
            AdjacencyStack(raw=raw)


class TestNormalize:
    def test_identity_with_alpha(self):
        raw = np.zeros((3, 2, 2))
        raw[0] = np.eye(2)
        st = normalize(AdjacencyStack(raw=raw))
        assert np.allclose(st.normalized[0], np.eye(2) / 1.001, atol=1e-15)

    def test_two_node_chain_hand_value(self):
        raw = np.zeros((3, 2, 2))
        raw[0] = np.eye(2)
        raw[SUBSET_PARENT][0, 1] = 1.0
        raw[SUBSET_CHILD][1, 0] = 1.0
        st = normalize(AdjacencyStack(raw=raw))
        want = 1.0 / np.sqrt((1 + DEFAULT_ALPHA) * DEFAULT_ALPHA)
        assert st.normalized[SUBSET_PARENT][0, 1] == pytest.approx(want, rel=1e-12)
        assert st.normalized[SUBSET_PARENT][0, 1] == pytest.approx(31.607, abs=1e-3)

    def test_all_zero_subset_stays_finite(self):
        raw = np.zeros((3, 4, 4))
        raw[0] = np.eye(4)
        st = normalize(AdjacencyStack(raw=raw))
        assert np.isfinite(st.normalized).all()
        assert np.array_equal(st.normalized[SUBSET_PARENT], np.zeros((4, 4)))

    @pytest.mark.parametrize("name", ["whole_body", "major_part"])
    def test_matches_brute_force_on_shipped_skeletons(self, name):
        sk = skelmotion.builtin_skeleton(name)
        for builder in (build_vertex_partition, build_edge_partition):
            stack = normalize(partition_to_stack(builder(sk)))
            want = brute_force_normalize(stack.raw, stack.alpha)
            assert np.abs(stack.normalized - want).max() < 1e-12

    def test_symmetric_input_symmetric_output(self):
        raw = np.zeros((3, 3, 3))
        raw[0] = np.eye(3)
        sym = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        raw[1] = sym
        raw[2] = sym
        st = normalize(AdjacencyStack(raw=raw))
        assert np.abs(st.normalized[1] - st.normalized[1].T).max() < 1e-12

    def test_never_nan_on_random_01_matrices(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 8))
            a = (rng.random((n, n)) < 0.4).astype(float)
            raw = np.stack([np.eye(n), a, a.T])
            st = normalize(AdjacencyStack(raw=raw))
            assert np.isfinite(st.normalized).all()
