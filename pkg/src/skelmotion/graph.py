"""Neighbour partitions and normalised adjacency stacks for the joint
(vertex) graph and the bone (edge) graph.

Three neighbour subsets per element: 0 = self, 1 = parent, 2 = child, so
the kernel size K is 3. Each subset k gets its own 0/1 adjacency matrix
``A_k``; ``A_0`` is the identity and ``A_1.T == A_2``. Normalisation is
the symmetric form ``deg^{-1/2} A deg^{-1/2}`` with the per-row degree
regularised by ``alpha`` so empty rows stay finite.
"""

from dataclasses import dataclass, field

import numpy as np

K_SUBSETS = 3
SUBSET_SELF, SUBSET_PARENT, SUBSET_CHILD = 0, 1, 2

DEFAULT_ALPHA = 0.001


@dataclass(frozen=True)
class NeighborPartition:
    """Per-element neighbour lists with subset labels and cardinalities."""

    size: int
    members: tuple          # members[i] = ((neighbor_id, subset_index), ...)
    cardinalities: np.ndarray = field(init=False)   # (size, K) int

    def __post_init__(self):
        card = np.zeros((self.size, K_SUBSETS), dtype=np.intp)
        for i, nbrs in enumerate(self.members):
            for _, k in nbrs:
                if not 0 <= k < K_SUBSETS:
                    raise ValueError(f"subset index {k} out of range")
                card[i, k] += 1
        if self.size and not (card[:, SUBSET_SELF] == 1).all():
            raise ValueError("every element must appear in its own self subset")
        card.flags.writeable = False
        object.__setattr__(self, "cardinalities", card)


@dataclass(frozen=True)
class AdjacencyStack:
    """K stacked 0/1 adjacency matrices plus their normalised forms."""

    raw: np.ndarray                   # (K, N, N)
    alpha: float = DEFAULT_ALPHA
    normalized: np.ndarray = None     # (K, N, N) or None until normalize()

    def __post_init__(self):
        raw = np.array(self.raw, dtype=np.float64)
        if raw.ndim != 3 or raw.shape[0] != K_SUBSETS or raw.shape[1] != raw.shape[2]:
            raise ValueError("raw must be (K, N, N)")
        n = raw.shape[1]
        if n and not np.array_equal(raw[SUBSET_SELF], np.eye(n)):
            raise ValueError("A_0 must be the identity")
        if not np.array_equal(raw[SUBSET_PARENT].T, raw[SUBSET_CHILD]):
            raise ValueError("parent and child adjacency must be transposes")
        raw.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        if self.normalized is not None:
            nrm = np.array(self.normalized, dtype=np.float64)
            nrm.flags.writeable = False
            object.__setattr__(self, "normalized", nrm)

    @property
    def size(self):
        return self.raw.shape[1]


def _tree_partition(size, parent_of):
    members = []
    children = [[] for _ in range(size)]
    for i in range(size):
        p = parent_of[i]
        if p >= 0:
            children[p].append(i)
    for i in range(size):
        nbrs = [(i, SUBSET_SELF)]
        if parent_of[i] >= 0:
            nbrs.append((int(parent_of[i]), SUBSET_PARENT))
        nbrs.extend((c, SUBSET_CHILD) for c in children[i])
        members.append(tuple(nbrs))
    return NeighborPartition(size=size, members=tuple(members))


def build_vertex_partition(skel):
    """Joint-graph partition following the joint tree."""
    return _tree_partition(skel.n_joints, skel.joint_parents)


def build_edge_partition(skel):
    """Bone-graph partition following the bone hierarchy."""
    return _tree_partition(skel.n_bones, skel.bone_parent)


def partition_to_stack(part, alpha=DEFAULT_ALPHA):
    """Raw adjacency stack from a partition (normalisation not applied)."""
    n = part.size
    raw = np.zeros((K_SUBSETS, n, n), dtype=np.float64)
    for i, nbrs in enumerate(part.members):
        for j, k in nbrs:
            raw[k, i, j] = 1.0
    return AdjacencyStack(raw=raw, alpha=alpha)


def normalize(stack):
    """Fill the normalised matrices: ``deg^{-1/2} A_k deg^{-1/2}`` with
    ``deg_ii = sum_n A_k[i, n] + alpha``, computed per subset matrix."""
    out = np.empty_like(stack.raw)
    for k in range(K_SUBSETS):
        a = stack.raw[k]
        deg = a.sum(axis=1) + stack.alpha
        inv = np.where(deg > 0.0, 1.0 / np.sqrt(np.where(deg > 0.0, deg, 1.0)), 0.0)
        out[k] = inv[:, None] * a * inv[None, :]
    return AdjacencyStack(raw=stack.raw, alpha=stack.alpha, normalized=out)


def build_stacks(skel, alpha=DEFAULT_ALPHA):
    """Normalised vertex and edge stacks for a skeleton."""
    vs = normalize(partition_to_stack(build_vertex_partition(skel), alpha))
    es = normalize(partition_to_stack(build_edge_partition(skel), alpha))
    return vs, es
