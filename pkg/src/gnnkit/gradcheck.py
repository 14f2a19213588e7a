"""Finite-difference check suite over every engine op and every layer.

Each case draws a random instance from a seeded generator and returns a
scalar-valued program plus its inputs. Non-scalar outputs are contracted
with a fixed random matrix so every output entry contributes to the
gradient. Inputs that land within ``KINK_MARGIN`` of a relu/clip kink or
of a max tie are resampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import autograd as ag
from .autoencoder import decoder_bce_loss, gae_loss, inner_product_decode, kl_divergence
from .autograd import Tensor, finite_diff_check
from .graph import SparseMatrix, adjacency_sparse, build_graph
from .layers import (ModelParams, gcn_layer, init_rgnn_params, output_edge, output_graph,
                     output_vertex, rgnn_run, rgnn_transition, sage_mean_layer, sage_pool_layer)
from .spectral import gcn_norm_adjacency

KINK_MARGIN = 1e-3
INSTANCES = 20


@dataclass
class CaseResult:
    name: str
    instances: int
    worst: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst < self.tol


def _contract(out: Tensor, r: np.ndarray) -> Tensor:
    return ag.sum_all(ag.elementwise_mul(out, r))


def _away_from(x: np.ndarray, kinks, rng) -> np.ndarray:
    """Redraw entries closer than the margin to any kink."""
    for k in kinks:
        bad = np.abs(x - k) < KINK_MARGIN
        while bad.any():
            x[bad] = rng.normal(size=int(bad.sum()))
            bad = np.abs(x - k) < KINK_MARGIN
    return x


def _distinct(x: np.ndarray, rng) -> np.ndarray:
    """Redraw until all values are pairwise at least the margin apart."""
    while True:
        flat = np.sort(x.ravel())
        if flat.size < 2 or np.min(np.diff(flat)) >= KINK_MARGIN:
            return x
        x = rng.normal(size=x.shape)


def _rand_graph(rng, n: Optional[int] = None, p: float = 0.4):
    n = n or int(rng.integers(3, 7))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if not pairs:
        pairs = [(0, 1)]
    return build_graph(n, pairs)


def _rand_sparse(rng, rows, cols) -> SparseMatrix:
    dense = rng.normal(size=(rows, cols)) * (rng.random((rows, cols)) < 0.5)
    return SparseMatrix.from_dense(dense)


# --- op cases: each returns (program, inputs) -------------------------------------

def _unary(op, kinks=(), positive=False):
    def case(rng):
        x = rng.normal(size=(int(rng.integers(1, 5)), int(rng.integers(1, 5))))
        if positive:
            x = np.abs(x) + 0.1
        x = _away_from(x, kinks, rng)
        r = rng.normal(size=op(Tensor(x)).shape)
        return (lambda a: _contract(op(a), r)), [Tensor(x)]
    return case


def _matmul(rng):
    n, k, m = rng.integers(1, 5, size=3)
    r = rng.normal(size=(n, m))
    return (lambda a, b: _contract(ag.matmul(a, b), r)), [Tensor(rng.normal(size=(n, k))),
                                                          Tensor(rng.normal(size=(k, m)))]


def _sparse_dense(rng):
    n, k, m = rng.integers(1, 5, size=3)
    s = _rand_sparse(rng, n, k)
    r = rng.normal(size=(n, m))
    return (lambda b: _contract(ag.sparse_dense_matmul(s, b), r)), [Tensor(rng.normal(size=(k, m)))]


def _add(rng):
    n, m = rng.integers(1, 5, size=2)
    r = rng.normal(size=(n, m))
    shape_b = (m,) if rng.random() < 0.5 else (n, m)
    return (lambda a, b: _contract(ag.add(a, b), r)), [Tensor(rng.normal(size=(n, m))),
                                                       Tensor(rng.normal(size=shape_b))]


def _mul(rng):
    n, m = rng.integers(1, 5, size=2)
    r = rng.normal(size=(n, m))
    return (lambda a, b: _contract(ag.elementwise_mul(a, b), r)), [Tensor(rng.normal(size=(n, m))),
                                                                   Tensor(rng.normal(size=(n, m)))]


def _row_max(rng):
    n, m = rng.integers(1, 5, size=2)
    x = _distinct(rng.normal(size=(n, m)), rng)
    r = rng.normal(size=n)
    return (lambda a: _contract(ag.row_max(a), r)), [Tensor(x)]


def _concat(rng):
    n = int(rng.integers(1, 5))
    widths = rng.integers(1, 4, size=int(rng.integers(1, 4)))
    r = rng.normal(size=(n, int(widths.sum())))
    xs = [Tensor(rng.normal(size=(n, int(w)))) for w in widths]
    return (lambda *a: _contract(ag.concat_cols(a), r)), xs


def _gather(rng):
    n, m = rng.integers(1, 5, size=2)
    idx = rng.integers(0, n, size=int(rng.integers(1, 8)))
    r = rng.normal(size=(len(idx), m))
    return (lambda a: _contract(ag.gather_rows(a, idx), r)), [Tensor(rng.normal(size=(n, m)))]


def _scatter_add(rng):
    k, m, n = rng.integers(1, 6, size=3)
    idx = rng.integers(0, n, size=k)
    r = rng.normal(size=(n, m))
    return (lambda a: _contract(ag.scatter_add_rows(a, idx, n), r)), [Tensor(rng.normal(size=(k, m)))]


def _scatter_max(rng):
    k, m, n = rng.integers(1, 6, size=3)
    idx = rng.integers(0, n, size=k)
    x = _distinct(rng.normal(size=(k, m)), rng)
    r = rng.normal(size=(n, m))
    return (lambda a: _contract(ag.scatter_max_rows(a, idx, n), r)), [Tensor(x)]


def _softmax(rng):
    n, m = rng.integers(1, 5, size=2)
    r = rng.normal(size=(n, m))
    return (lambda a: _contract(ag.softmax_rows(a), r)), [Tensor(2 * rng.normal(size=(n, m)))]


def _clip(rng):
    return _unary(lambda a: ag.clip(a, -0.5, 0.5), kinks=(-0.5, 0.5))(rng)


OP_CASES: dict[str, Callable] = {
    "matmul": _matmul,
    "sparse_dense_matmul": _sparse_dense,
    "add": _add,
    "elementwise_mul": _mul,
    "scale": _unary(lambda a: ag.scale(a, -1.7)),
    "shift": _unary(lambda a: ag.shift(a, 0.3)),
    "transpose": _unary(lambda a: ag.sum_all(ag.elementwise_mul(ag.transpose(a), ag.transpose(a)))),
    "row_sum": _unary(lambda a: ag.elementwise_mul(ag.row_sum(a), ag.row_sum(a))),
    "row_mean": _unary(lambda a: ag.elementwise_mul(ag.row_mean(a), ag.row_mean(a))),
    "row_max": _row_max,
    "sum_all": _unary(lambda a: ag.elementwise_mul(ag.sum_all(a), ag.sum_all(a))),
    "mean_all": _unary(lambda a: ag.elementwise_mul(ag.mean_all(a), ag.mean_all(a))),
    "concat_cols": _concat,
    "sigmoid": _unary(ag.sigmoid),
    "relu": _unary(ag.relu, kinks=(0.0,)),
    "tanh": _unary(ag.tanh),
    "log": _unary(ag.log, positive=True),
    "exp": _unary(ag.exp),
    "clip": _clip,
    "softmax_rows": _softmax,
    "gather_rows": _gather,
    "scatter_add_rows": _scatter_add,
    "scatter_max_rows": _scatter_max,
}


# --- layer cases -----------------------------------------------------------------

def _param_case(params: ModelParams, program):
    names = list(params)

    def f(*ts):
        for name, t in zip(names, ts):
            params._tensors[name] = t
        return program()

    return f, params.tensors()


def _rgnn_case(level: str, steps: int, featureless: bool = False, edge_feats: bool = False):
    def case(rng):
        g = _rand_graph(rng)
        x = None if featureless else rng.normal(size=(g.n, 2))
        e = rng.normal(size=(g.m, 2)) if edge_feats else None
        g = build_graph(g.n, g.edges, vertex_features=x, edge_features=e)
        params = ModelParams(int(rng.integers(1 << 31)))
        init_rgnn_params(params, 8 if featureless else 2, 2 if edge_feats else 0, 3, 2, level,
                         constant_embedding=featureless)
        for t in params.tensors():
            t.data = rng.normal(scale=0.5, size=t.shape)
        rows = {"vertex": g.n, "edge": g.m, "graph": None}[level]
        r = rng.normal(size=(rows, 2) if rows else 2)
        out = {"vertex": output_vertex, "edge": output_edge, "graph": output_graph}[level]
        return _param_case(params, lambda: _contract(out(rgnn_run(g, params, steps), g, params), r))
    return case


def _transition(rng):
    g = _rand_graph(rng)
    g = build_graph(g.n, g.edges, vertex_features=rng.normal(size=(g.n, 2)))
    params = init_rgnn_params(ModelParams(int(rng.integers(1 << 31))), 2, 0, 3)
    h0 = Tensor(rng.normal(size=(g.n, 3)))
    r = rng.normal(size=(g.n, 3))
    names = list(params)

    def f(h, *ts):
        for name, t in zip(names, ts):
            params._tensors[name] = t
        return _contract(rgnn_transition(g, h, params).values, r)

    return f, [h0] + params.tensors()


def _gcn(rng):
    g = _rand_graph(rng)
    a = gcn_norm_adjacency(g)
    fi, fo = rng.integers(1, 4, size=2)
    h = Tensor(rng.normal(size=(g.n, fi)))
    w, b = Tensor(rng.normal(size=(fi, fo))), Tensor(rng.normal(size=fo))
    r = rng.normal(size=(g.n, fo))

    def f(h, w, b):
        out = gcn_layer(a, h, w, None, b)
        return _contract(ag.tanh(out), r)

    return f, [h, w, b]


def _gcn_relu(rng):
    g = _rand_graph(rng)
    a = gcn_norm_adjacency(g)
    fi, fo = rng.integers(1, 4, size=2)
    h = rng.normal(size=(g.n, fi))
    w = rng.normal(size=(fi, fo))
    while np.min(np.abs(a.to_dense() @ h @ w)) < KINK_MARGIN:
        w = rng.normal(size=(fi, fo))
    r = rng.normal(size=(g.n, fo))
    return (lambda h, w: _contract(gcn_layer(a, h, w, "relu"), r)), [Tensor(h), Tensor(w)]


def _sage_mean(rng):
    g = _rand_graph(rng)
    fi, fo = rng.integers(1, 4, size=2)
    ts = [Tensor(rng.normal(size=s)) for s in [(g.n, fi), (fi, fo), (fi, fo), (fo,)]]
    r = rng.normal(size=(g.n, fo))
    return (lambda h, ws, wn, b: _contract(sage_mean_layer(g, h, ws, wn, "tanh", b), r)), ts


def _sage_pool(rng):
    g = _rand_graph(rng)
    fi, fp, fo = rng.integers(1, 4, size=3)
    while True:
        h, wp, bp = rng.normal(size=(g.n, fi)), rng.normal(size=(fi, fp)), rng.normal(size=fp)
        pre = h @ wp + bp
        src, dst, _ = g.arcs()
        # keep relu inputs off the kink and pooled candidates free of near-ties
        ok = np.min(np.abs(pre)) >= KINK_MARGIN
        msg = np.maximum(pre, 0)[src]
        for v in range(g.n):
            for c in range(fp):
                vals = np.sort(msg[dst == v, c])
                vals = vals[vals > 0]
                if len(vals) > 1 and np.min(np.diff(vals)) < KINK_MARGIN:
                    ok = False
        if ok:
            break
    ts = [Tensor(h), Tensor(wp), Tensor(bp), Tensor(rng.normal(size=(fi, fo))),
          Tensor(rng.normal(size=(fp, fo))), Tensor(rng.normal(size=fo))]
    r = rng.normal(size=(g.n, fo))
    return (lambda h, wp, bp, ws, wn, b: _contract(sage_pool_layer(g, h, wp, bp, ws, wn, "tanh", b), r)), ts


def _gae_loss(rng):
    g = _rand_graph(rng)
    a = adjacency_sparse(g, weighted=False).to_dense() + np.eye(g.n)
    z = Tensor(rng.normal(size=(g.n, 3)))
    return (lambda z: gae_loss(inner_product_decode(z), a)), [z]


def _decoder_bce(rng):
    g = _rand_graph(rng)
    a = SparseMatrix.from_dense(adjacency_sparse(g, weighted=False).to_dense() + np.eye(g.n))
    z = Tensor(rng.normal(size=(g.n, 3)))
    return (lambda z: decoder_bce_loss(z, a, block=2)), [z]


def _kl(rng):
    n, d = rng.integers(1, 5, size=2)
    return kl_divergence, [Tensor(rng.normal(size=(n, d))), Tensor(rng.normal(size=(n, d)))]


LAYER_CASES: dict[str, Callable] = {
    "rgnn_transition": _transition,
    "rgnn_run+output_vertex": _rgnn_case("vertex", 2),
    "rgnn_run+output_edge": _rgnn_case("edge", 2, edge_feats=True),
    "rgnn_run+output_graph": _rgnn_case("graph", 3),
    "rgnn_run+output_graph (featureless)": _rgnn_case("graph", 2, featureless=True),
    "gcn_layer": _gcn,
    "gcn_layer (relu)": _gcn_relu,
    "sage_mean_layer": _sage_mean,
    "sage_pool_layer": _sage_pool,
    "gae_loss": _gae_loss,
    "decoder_bce_loss": _decoder_bce,
    "kl_divergence": _kl,
}


def run_case(name: str, case: Callable, instances: int = INSTANCES, seed: int = 0,
             tol: float = 1e-4) -> CaseResult:
    rng = np.random.default_rng([seed, sum(map(ord, name))])
    worst = 0.0
    for _ in range(instances):
        f, xs = case(rng)
        worst = max(worst, finite_diff_check(f, xs, eps=1e-5, tol=tol).max_rel_error)
    return CaseResult(name, instances, worst, tol)


def run_suite(instances: int = INSTANCES, seed: int = 0, tol: float = 1e-4,
              cases: Optional[dict] = None) -> list[CaseResult]:
    cases = cases if cases is not None else {**OP_CASES, **LAYER_CASES}
    return [run_case(name, case, instances, seed, tol) for name, case in cases.items()]
