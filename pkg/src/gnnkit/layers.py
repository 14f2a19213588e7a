"""Message-passing layers built on the gradient engine.

Recurrent GNN pieces (transition, iteration to a fixed point, vertex / edge /
graph outputs) plus the spatial convolutions: GCN and GraphSAGE with mean or
max-pool aggregation. Layer functions take tensors or arrays and return
tensors; parameters live in a :class:`ModelParams`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Union

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .graph import Graph, SparseMatrix

log = logging.getLogger(__name__)

CONSTANT_EMBED_SIZE = 8

Activation = Union[str, Callable[[Tensor], Tensor], None]

_ACTIVATIONS = {
    None: lambda x: x,
    "identity": lambda x: x,
    "relu": ag.relu,
    "tanh": ag.tanh,
    "sigmoid": ag.sigmoid,
}


def activation_fn(activation: Activation) -> Callable[[Tensor], Tensor]:
    if callable(activation):
        return activation
    try:
        return _ACTIVATIONS[activation]
    except KeyError:
        raise ValueError(f"unknown activation {activation!r}") from None


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))


class ModelParams:
    """Named trainable tensors with fixed shapes."""

    def __init__(self, seed: Optional[int] = None):
        self._tensors: dict[str, Tensor] = {}
        self.rng = np.random.default_rng(seed)

    def add(self, name: str, value) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(value, requires_grad=True, name=name)
        self._tensors[name] = t
        return t

    def weight(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        return self.add(name, glorot(self.rng, fan_in, fan_out))

    def bias(self, name: str, size: int) -> Tensor:
        return self.add(name, np.zeros(size))

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def tensors(self) -> list[Tensor]:
        return list(self._tensors.values())

    def shapes(self) -> dict[str, tuple]:
        return {k: t.shape for k, t in self._tensors.items()}

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._tensors.items()}

    def load(self, state: dict[str, np.ndarray]) -> None:
        for k, v in state.items():
            t = self._tensors[k]
            v = np.asarray(v, dtype=np.float64)
            if v.shape != t.shape:
                raise ValueError(f"parameter {k!r}: shape {v.shape} != {t.shape}")
            t.data = v.copy()

    def zero_grad(self) -> None:
        ag.zero_grad(self.tensors())


@dataclass
class HiddenStates:
    values: Tensor
    iteration: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def numpy(self) -> np.ndarray:
        return self.values.data


# --- recurrent GNN -----------------------------------------------------------

def vertex_feature_size(g: Graph) -> int:
    return g.vertex_features.shape[1] if g.vertex_features is not None else CONSTANT_EMBED_SIZE


def edge_feature_size(g: Graph) -> int:
    return g.edge_features.shape[1] if g.edge_features is not None else 0


def init_rgnn_params(params: ModelParams, vertex_dim: int, edge_dim: int, state_dim: int,
                     out_dim: Optional[int] = None, level: str = "graph",
                     constant_embedding: bool = False) -> ModelParams:
    """Register transition (and optionally output) parameters.

    ``vertex_dim`` is the width used for vertex features; with
    ``constant_embedding`` a learned ``1 x vertex_dim`` row stands in for them.
    """
    if constant_embedding:
        params.add("vertex_embed", params.rng.uniform(-1.0, 1.0, size=(1, vertex_dim)))
    params.weight("f_w", 2 * vertex_dim + edge_dim + state_dim, state_dim)
    params.bias("f_b", state_dim)
    if out_dim is not None:
        fan_in = {"vertex": vertex_dim + state_dim,
                  "edge": edge_dim + 2 * (vertex_dim + state_dim),
                  "graph": state_dim}[level]
        params.weight("g_w", fan_in, out_dim)
        params.bias("g_b", out_dim)
    return params


def vertex_inputs(g: Graph, params: ModelParams) -> Tensor:
    """Vertex feature matrix, or the learned constant embedding when the graph has none."""
    if g.vertex_features is not None:
        return Tensor(g.vertex_features)
    if "vertex_embed" not in params:
        raise ValueError("graph has no vertex features and no 'vertex_embed' parameter is defined")
    return ag.gather_rows(params["vertex_embed"], np.zeros(g.n, dtype=np.int64))


def _states(h) -> Tensor:
    if isinstance(h, HiddenStates):
        return h.values
    return ag.as_tensor(h)


def rgnn_transition(g: Graph, h_prev, params: ModelParams) -> HiddenStates:
    """One application of the transition function.

    Each vertex sums, over its neighbors ``j``, the message
    ``tanh([x_i, e_ij, x_j, h_j] W + b)``. Vertices without neighbors get zeros.
    """
    h = _states(h_prev)
    if h.shape[0] != g.n:
        raise ValueError(f"states have {h.shape[0]} rows, graph has {g.n} vertices")
    x = vertex_inputs(g, params)
    src, dst, eid = g.arcs()
    parts = [ag.gather_rows(x, dst)]
    if g.edge_features is not None:
        parts.append(Tensor(g.edge_features[eid]))
    parts += [ag.gather_rows(x, src), ag.gather_rows(h, src)]
    msg = ag.tanh(ag.add(ag.concat_cols(parts) @ params["f_w"], params["f_b"]))
    out = ag.scatter_add_rows(msg, dst, g.n)
    it = h_prev.iteration + 1 if isinstance(h_prev, HiddenStates) else 1
    return HiddenStates(out, it)


def initial_states(g: Graph, params: ModelParams) -> HiddenStates:
    return HiddenStates(Tensor(np.zeros((g.n, params["f_b"].shape[0]))), 0)


def transition_lipschitz_bound(g: Graph, params: ModelParams) -> float:
    """Upper bound on the transition's Lipschitz constant in the state (max-norm)."""
    d = params["f_b"].shape[0]
    w_state = params["f_w"].data[-d:]
    src, dst, _ = g.arcs()
    max_deg = np.bincount(dst, minlength=g.n).max() if len(dst) else 0
    return float(max_deg * np.abs(w_state).sum(axis=0).max())


def rgnn_run(g: Graph, params: ModelParams, k: int, eps: Optional[float] = None,
             check_contraction: bool = False) -> HiddenStates:
    """Iterate the transition from zero states up to ``k`` times.

    With ``eps`` set, stops as soon as the largest absolute state change is
    below it. ``iteration`` on the result records how many steps ran.
    """
    if k < 1:
        raise ValueError(f"need at least one iteration, got k={k}")
    if check_contraction:
        bound = transition_lipschitz_bound(g, params)
        if bound >= 1.0:
            log.warning("transition may not be a contraction (Lipschitz bound %.3g >= 1)", bound)
    h = initial_states(g, params)
    for _ in range(k):
        new = rgnn_transition(g, h, params)
        change = float(np.max(np.abs(new.values.data - h.values.data))) if g.n else 0.0
        h = new
        if eps is not None and change < eps:
            break
    return h


def output_vertex(h, g: Graph, params: ModelParams) -> Tensor:
    """Per-vertex logits from ``[x_i, h_i]`` through an affine map."""
    hs = _states(h)
    x = vertex_inputs(g, params)
    z = ag.concat_cols([x, hs])
    if z.shape[1] != params["g_w"].shape[0]:
        raise ValueError(f"output map expects width {params['g_w'].shape[0]}, got {z.shape[1]}")
    return ag.add(z @ params["g_w"], params["g_b"])


def output_edge(h, g: Graph, params: ModelParams) -> Tensor:
    """Per-edge logits from ``[e_ij, x_i, h_i, x_j, h_j]`` in stored edge order."""
    hs = _states(h)
    x = vertex_inputs(g, params)
    i, j = g.edges[:, 0], g.edges[:, 1]
    parts = []
    if g.edge_features is not None:
        parts.append(Tensor(g.edge_features))
    parts += [ag.gather_rows(x, i), ag.gather_rows(hs, i), ag.gather_rows(x, j), ag.gather_rows(hs, j)]
    return ag.add(ag.concat_cols(parts) @ params["g_w"], params["g_b"])


def mean_pool_matrix(graph_index, n_graphs: Optional[int] = None) -> SparseMatrix:
    """Sparse ``B x N`` matrix averaging the rows belonging to each graph."""
    graph_index = np.asarray(graph_index, dtype=np.int64)
    if n_graphs is None:
        n_graphs = int(graph_index.max()) + 1 if len(graph_index) else 0
    counts = np.bincount(graph_index, minlength=n_graphs).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("every graph needs at least one vertex for a mean readout")
    n = len(graph_index)
    return SparseMatrix.from_coo(graph_index, np.arange(n), 1.0 / counts[graph_index], (n_graphs, n))


def output_graph(h, g: Graph, params: ModelParams, graph_index=None, n_graphs=None) -> Tensor:
    """Mean readout over vertex states followed by an affine map.

    For a single graph returns a length-C vector. With ``graph_index`` (a
    disjoint union of several graphs) returns one row of logits per graph.
    """
    hs = _states(h)
    if hs.shape[0] == 0:
        raise ValueError("cannot read out an empty graph")
    if graph_index is None:
        pooled = ag.sparse_dense_matmul(mean_pool_matrix(np.zeros(hs.shape[0], dtype=np.int64), 1), hs)
        return _first_row(ag.add(pooled @ params["g_w"], params["g_b"]))
    pooled = ag.sparse_dense_matmul(mean_pool_matrix(graph_index, n_graphs), hs)
    return ag.add(pooled @ params["g_w"], params["g_b"])


def _first_row(t: Tensor) -> Tensor:
    """Row 0 of a matrix as a vector, keeping the tape."""
    return ag.row_sum(ag.transpose(t))


# --- spatial convolutions ----------------------------------------------------

def gcn_layer(a_norm: SparseMatrix, h_prev, w, activation: Activation = None, bias=None) -> Tensor:
    """``activation(A_norm H W)`` with an optional row bias."""
    h = ag.as_tensor(h_prev)
    w = ag.as_tensor(w)
    if a_norm.shape[1] != h.shape[0] or h.shape[1] != w.shape[0]:
        raise ValueError(f"gcn_layer: A {a_norm.shape}, H {h.shape}, W {w.shape} do not chain")
    out = ag.sparse_dense_matmul(a_norm, h @ w)
    if bias is not None:
        out = ag.add(out, bias)
    return activation_fn(activation)(out)


def neighbor_mean_operator(g: Graph) -> SparseMatrix:
    """Row-normalized adjacency over message arcs; empty rows stay zero."""
    src, dst, _ = g.arcs()
    deg = np.bincount(dst, minlength=g.n).astype(np.float64)
    return SparseMatrix.from_coo(dst, src, 1.0 / deg[dst], (g.n, g.n))


def sage_mean_layer(g: Graph, h_prev, w_self, w_neigh, activation: Activation = None,
                    bias=None, mean_op: Optional[SparseMatrix] = None) -> Tensor:
    """GraphSAGE with mean aggregation: ``act(H W_self + mean_N(H) W_neigh)``."""
    h = ag.as_tensor(h_prev)
    mean_op = neighbor_mean_operator(g) if mean_op is None else mean_op
    out = ag.add(h @ w_self, ag.sparse_dense_matmul(mean_op, h @ w_neigh))
    if bias is not None:
        out = ag.add(out, bias)
    return activation_fn(activation)(out)


def sage_pool_layer(g: Graph, h_prev, w_pool, b_pool, w_self, w_neigh,
                    activation: Activation = None, bias=None) -> Tensor:
    """GraphSAGE with max-pool aggregation.

    Neighbor messages ``relu(H W_pool + b_pool)`` are max-pooled elementwise
    per neighborhood, then combined as in :func:`sage_mean_layer`.
    """
    h = ag.as_tensor(h_prev)
    msg = ag.relu(ag.add(h @ w_pool, b_pool))
    src, dst, _ = g.arcs()
    pooled = ag.scatter_max_rows(ag.gather_rows(msg, src), dst, g.n)
    out = ag.add(h @ w_self, pooled @ w_neigh)
    if bias is not None:
        out = ag.add(out, bias)
    return activation_fn(activation)(out)
