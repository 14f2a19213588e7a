"""Immutable graphs and their matrix representations.

Dense matrices are plain float64 ``numpy`` arrays. Sparse matrices use the
small CSR container defined here, which is what the layers multiply with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

LAPLACIAN_KINDS = ("unnormalized", "symmetric", "random_walk")


class GraphError(ValueError):
    """Raised when a graph or a graph-derived matrix cannot be built."""


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed sparse row matrix with sorted column indices per row."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shape: tuple[int, int]
    _csr: sp.csr_matrix = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        data = np.asarray(self.data, dtype=np.float64)
        rows, cols = self.shape
        if indptr.shape != (rows + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise GraphError("malformed row offsets")
        if np.any(np.diff(indptr) < 0):
            raise GraphError("row offsets must be monotone")
        if len(data) != len(indices):
            raise GraphError("values and column indices differ in length")
        if len(indices) and (indices.min() < 0 or indices.max() >= cols):
            raise GraphError("column index out of range")
        if len(indices) > 1:
            row_of = np.repeat(np.arange(rows), np.diff(indptr))
            bad = np.nonzero((np.diff(indices) <= 0) & (np.diff(row_of) == 0))[0]
            if len(bad):
                raise GraphError(f"column indices of row {int(row_of[bad[0]])} are not strictly increasing")
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", (int(rows), int(cols)))
        object.__setattr__(self, "_csr", sp.csr_matrix((data, indices, indptr), shape=self.shape))

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        indptr = np.zeros(dense.shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(np.cumsum(indptr), cols, dense[rows, cols], dense.shape)

    @classmethod
    def from_coo(cls, rows, cols, values, shape) -> "SparseMatrix":
        """Build from triplets; duplicate coordinates are summed."""
        m = sp.coo_matrix((values, (rows, cols)), shape=shape).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr, m.indices, m.data, shape)

    @property
    def nnz(self) -> int:
        return len(self.data)

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        t = self._csr.T.tocsr()
        t.sort_indices()
        return SparseMatrix(t.indptr, t.indices, t.data, (self.shape[1], self.shape[0]))

    @cached_property
    def T(self) -> "SparseMatrix":
        return self.transpose()

    def matmul(self, dense: np.ndarray) -> np.ndarray:
        dense = np.asarray(dense, dtype=np.float64)
        if dense.shape[0] != self.shape[1]:
            raise GraphError(f"cannot multiply {self.shape} by {dense.shape}")
        return np.asarray(self._csr @ dense)

    def __matmul__(self, other):
        return self.matmul(other)


@dataclass(frozen=True, eq=False)
class Graph:
    """A canonicalized graph on vertices ``0..n-1``.

    Undirected edges are stored once as ``(i, j)`` with ``i <= j`` and sorted
    lexicographically. ``edge_features`` and ``weights`` are aligned with the
    stored edge order.
    """

    n: int
    edges: np.ndarray
    vertex_features: Optional[np.ndarray] = None
    edge_features: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    directed: bool = False

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def has_self_loops(self) -> bool:
        return bool(np.any(self.edges[:, 0] == self.edges[:, 1])) if self.m else False

    def edge_weights(self) -> np.ndarray:
        return self.weights if self.weights is not None else np.ones(self.m)

    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Directed (source, target, edge index) triples used for message passing.

        Undirected edges produce both directions; self-loops appear once.
        """
        src, dst = self.edges[:, 0], self.edges[:, 1]
        eid = np.arange(self.m)
        if self.directed:
            return src, dst, eid
        off = src != dst
        return (np.concatenate([src, dst[off]]),
                np.concatenate([dst, src[off]]),
                np.concatenate([eid, eid[off]]))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (self.n == other.n and self.directed == other.directed
                and same(self.edges, other.edges)
                and same(self.vertex_features, other.vertex_features)
                and same(self.edge_features, other.edge_features)
                and same(self.weights, other.weights))

    __hash__ = None


def build_graph(n: int, edges: Iterable[Sequence[int]] = (), *,
                vertex_features=None, edge_features=None, weights=None,
                directed: bool = False) -> Graph:
    """Validate and canonicalize a graph.

    Duplicate edges collapse to one (the first occurrence keeps its edge
    features and weight). Undirected pairs are stored with the smaller index
    first.
    """
    if n < 1:
        raise GraphError(f"vertex count must be >= 1, got {n}")
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    e = e.reshape(-1, 2)
    bad = np.nonzero((e < 0) | (e >= n))[0]
    if len(bad):
        k = int(bad[0])
        raise GraphError(f"edge {k} {tuple(e[k])} has an endpoint outside [0, {n})")

    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if len(weights) != len(e):
            raise GraphError(f"{len(weights)} weights given for {len(e)} edges")
        nonpos = np.nonzero(~(weights > 0))[0]
        if len(nonpos):
            k = int(nonpos[0])
            raise GraphError(f"edge {k} has non-positive weight {weights[k]}")
    if edge_features is not None:
        edge_features = np.asarray(edge_features, dtype=np.float64)
        if edge_features.ndim == 1:
            edge_features = edge_features[:, None]
        if len(edge_features) != len(e):
            raise GraphError(f"{len(edge_features)} edge feature rows given for {len(e)} edges")
    if vertex_features is not None:
        vertex_features = np.asarray(vertex_features, dtype=np.float64)
        if vertex_features.ndim == 1:
            vertex_features = vertex_features[:, None]
        if len(vertex_features) != n:
            raise GraphError(f"{len(vertex_features)} vertex feature rows given for {n} vertices")
        if not np.all(np.isfinite(vertex_features)):
            raise GraphError("vertex features must be finite")

    if not directed and len(e):
        e = np.sort(e, axis=1)
    if len(e):
        keys = e[:, 0] * n + e[:, 1]
        _, first = np.unique(keys, return_index=True)
        order = first[np.argsort(keys[first], kind="stable")]
    else:
        order = np.zeros(0, dtype=np.int64)
    e = e[order]
    if weights is not None:
        weights = weights[order]
    if edge_features is not None:
        edge_features = edge_features[order]
    for arr in (e, vertex_features, edge_features, weights):
        if arr is not None:
            arr.setflags(write=False)
    return Graph(n, e, vertex_features, edge_features, weights, directed)


def with_vertex_features(g: Graph, features) -> Graph:
    return build_graph(g.n, g.edges, vertex_features=features, edge_features=g.edge_features,
                       weights=g.weights, directed=g.directed)


def adjacency_sparse(g: Graph, weighted: bool = True) -> SparseMatrix:
    w = g.edge_weights() if weighted else np.ones(g.m)
    src, dst = g.edges[:, 0], g.edges[:, 1]
    if g.directed:
        return SparseMatrix.from_coo(src, dst, w, (g.n, g.n))
    off = src != dst
    rows = np.concatenate([src, dst[off]])
    cols = np.concatenate([dst, src[off]])
    return SparseMatrix.from_coo(rows, cols, np.concatenate([w, w[off]]), (g.n, g.n))


def adjacency(g: Graph, weighted: bool = True) -> np.ndarray:
    """N x N adjacency matrix; entries are edge weights when present."""
    return adjacency_sparse(g, weighted).to_dense()


def degree(g: Graph, count_self_loops: bool = False) -> np.ndarray:
    """Diagonal degree matrix (row sums of the weighted adjacency).

    Self-loops are left out unless ``count_self_loops`` is set.
    """
    a = adjacency(g)
    if not count_self_loops:
        np.fill_diagonal(a, 0.0)
    return np.diag(a.sum(axis=1))


def laplacian(g: Graph, kind: str = "unnormalized") -> np.ndarray:
    if kind not in LAPLACIAN_KINDS:
        raise GraphError(f"unknown Laplacian kind {kind!r}; expected one of {LAPLACIAN_KINDS}")
    a = adjacency(g)
    np.fill_diagonal(a, 0.0)
    d = a.sum(axis=1)
    if kind == "unnormalized":
        return np.diag(d) - a
    isolated = np.nonzero(d <= 0)[0]
    if len(isolated):
        raise GraphError(f"vertex {int(isolated[0])} is isolated; the {kind} Laplacian is undefined")
    eye = np.eye(g.n)
    if kind == "symmetric":
        s = 1.0 / np.sqrt(d)
        return eye - s[:, None] * a * s[None, :]
    return eye - a / d[:, None]


def neighbors(g: Graph, i: int) -> list[int]:
    """Sorted neighbors of ``i``; includes ``i`` only when it has a self-loop.

    For directed graphs this is the union of in- and out-neighbors.
    """
    if not 0 <= i < g.n:
        raise GraphError(f"vertex index {i} outside [0, {g.n})")
    e = g.edges
    out = set(e[e[:, 0] == i, 1].tolist()) | set(e[e[:, 1] == i, 0].tolist())
    return sorted(out)


def out_neighbors(g: Graph, i: int) -> list[int]:
    if not 0 <= i < g.n:
        raise GraphError(f"vertex index {i} outside [0, {g.n})")
    if not g.directed:
        return neighbors(g, i)
    return sorted(set(g.edges[g.edges[:, 0] == i, 1].tolist()))


def in_neighbors(g: Graph, i: int) -> list[int]:
    if not 0 <= i < g.n:
        raise GraphError(f"vertex index {i} outside [0, {g.n})")
    if not g.directed:
        return neighbors(g, i)
    return sorted(set(g.edges[g.edges[:, 1] == i, 0].tolist()))


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel vertex ``v`` as ``perm[v]``."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(g.n)):
        raise GraphError("not a permutation of the vertex set")
    feats = None
    if g.vertex_features is not None:
        feats = np.empty_like(g.vertex_features)
        feats[perm] = g.vertex_features
    return build_graph(g.n, perm[g.edges] if g.m else g.edges, vertex_features=feats,
                       edge_features=g.edge_features, weights=g.weights, directed=g.directed)


def connected_components(g: Graph) -> np.ndarray:
    """Component label per vertex, labels numbered in order of first vertex."""
    n_comp, labels = csgraph.connected_components(adjacency_sparse(g)._csr, directed=False)
    _, first = np.unique(labels, return_index=True)
    relabel = np.empty(n_comp, dtype=np.int64)
    relabel[np.argsort(first)] = np.arange(n_comp)
    return relabel[labels]


def disjoint_union(graphs: Sequence[Graph]) -> tuple[Graph, np.ndarray]:
    """Block-diagonal union of undirected graphs plus each vertex's graph index.

    Vertex features must be present on all graphs or on none.
    """
    if not graphs:
        raise GraphError("need at least one graph")
    offsets = np.cumsum([0] + [g.n for g in graphs])
    edges = np.concatenate([g.edges + off for g, off in zip(graphs, offsets[:-1])])
    has_x = [g.vertex_features is not None for g in graphs]
    if any(has_x) and not all(has_x):
        raise GraphError("vertex features present on some graphs but not others")
    x = np.concatenate([g.vertex_features for g in graphs]) if all(has_x) else None
    index = np.repeat(np.arange(len(graphs)), [g.n for g in graphs])
    return build_graph(int(offsets[-1]), edges, vertex_features=x), index
