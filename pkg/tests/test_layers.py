import numpy as np
import pytest
from hypothesis import given, strategies as st

from gnnkit import autograd as ag
from gnnkit.autograd import Tensor
from gnnkit.graph import build_graph, neighbors, permute
from gnnkit.layers import (CONSTANT_EMBED_SIZE, ModelParams, glorot, gcn_layer, init_rgnn_params,
                           output_edge, output_graph, output_vertex, rgnn_run, rgnn_transition,
                           initial_states, sage_mean_layer, sage_pool_layer,
                           transition_lipschitz_bound)
from gnnkit.spectral import gcn_norm_adjacency

from conftest import graphs, random_graph

STATE = 3


def rgnn_params(vdim, edim=0, out=2, level="graph", seed=0, featureless=False):
    p = ModelParams(seed)
    init_rgnn_params(p, vdim, edim, STATE, out, level, constant_embedding=featureless)
    return p


def with_features(g, rng, width=2, edge_width=None):
    e = rng.normal(size=(g.m, edge_width)) if edge_width else None
    return build_graph(g.n, g.edges, vertex_features=rng.normal(size=(g.n, width)), edge_features=e)


def transition_oracle(g, h, p):
    """Nested loop over vertices and their neighbors."""
    x = g.vertex_features
    w, b = p["f_w"].data, p["f_b"].data
    out = np.zeros((g.n, STATE))
    eid = {tuple(e): k for k, e in enumerate(g.edges.tolist())}
    for i in range(g.n):
        for j in neighbors(g, i):
            parts = [x[i]]
            if g.edge_features is not None:
                parts.append(g.edge_features[eid[(min(i, j), max(i, j))]])
            parts += [x[j], h[j]]
            out[i] += np.tanh(np.concatenate(parts) @ w + b)
    return out


class TestParams:
    def test_glorot_range(self, rng):
        w = glorot(rng, 30, 20)
        assert np.abs(w).max() <= np.sqrt(6 / 50)

    def test_duplicate_name(self):
        p = ModelParams(0)
        p.bias("b", 2)
        with pytest.raises(KeyError):
            p.bias("b", 2)

    def test_seeded_init(self):
        assert np.array_equal(rgnn_params(2, seed=4)["f_w"].data, rgnn_params(2, seed=4)["f_w"].data)

    def test_load_shape_check(self):
        p = rgnn_params(2)
        with pytest.raises(ValueError):
            p.load({"f_b": np.zeros(STATE + 1)})


class TestTransition:
    def test_edgeless_zero(self, rng):
        g = with_features(build_graph(4, []), rng)
        h = rgnn_transition(g, initial_states(g, rgnn_params(2)), rgnn_params(2))
        assert not h.values.data.any()

    def test_path_symmetry(self):
        g = build_graph(2, [(0, 1)], vertex_features=np.ones((2, 2)))
        h = rgnn_run(g, rgnn_params(2), 3).values.data
        assert np.array_equal(h[0], h[1])

    def test_matches_loop_oracle(self, rng):
        g = with_features(random_graph(rng, 7, 0.4), rng, edge_width=2)
        p = rgnn_params(2, 2)
        h = rng.normal(size=(7, STATE))
        assert np.allclose(rgnn_transition(g, Tensor(h), p).values.data, transition_oracle(g, h, p),
                           atol=1e-13)

    def test_star_two_hops(self, rng):
        # center 0, leaves 1..4; with K=2 the center sees the leaves' states
        g = with_features(build_graph(5, [(0, k) for k in range(1, 5)]), rng)
        p = rgnn_params(2)
        h1 = transition_oracle(g, np.zeros((5, STATE)), p)
        h2 = transition_oracle(g, h1, p)
        run2 = rgnn_run(g, p, 2)
        assert run2.iteration == 2
        assert np.allclose(run2.values.data, h2, atol=1e-13)
        assert not np.allclose(h2[0], h1[0])

    def test_k1_equals_single_transition(self, rng):
        g = with_features(random_graph(rng, 6, 0.5), rng)
        p = rgnn_params(2)
        one = rgnn_transition(g, initial_states(g, p), p).values.data
        assert np.array_equal(rgnn_run(g, p, 1).values.data, one)

    def test_eps_infinite_stops_after_one(self, rng):
        g = with_features(random_graph(rng, 6, 0.5), rng)
        assert rgnn_run(g, rgnn_params(2), 50, eps=np.inf).iteration == 1

    def test_k_must_be_positive(self, rng):
        g = with_features(random_graph(rng, 3, 0.5), rng)
        with pytest.raises(ValueError):
            rgnn_run(g, rgnn_params(2), 0)

    def test_contraction_converges(self, rng):
        g = with_features(random_graph(rng, 12, 0.3, connected=True), rng)
        p = rgnn_params(2)
        w = p["f_w"].data
        w[-STATE:] *= 0.5 / transition_lipschitz_bound(g, p)
        assert transition_lipschitz_bound(g, p) < 1
        h = rgnn_run(g, p, 200, eps=1e-6)
        assert h.iteration < 200

    def test_featureless_needs_embedding(self):
        g = build_graph(3, [(0, 1)])
        with pytest.raises(ValueError):
            rgnn_run(g, rgnn_params(2), 1)
        p = rgnn_params(CONSTANT_EMBED_SIZE, featureless=True)
        assert p["vertex_embed"].shape == (1, CONSTANT_EMBED_SIZE)
        assert rgnn_run(g, p, 2).values.shape == (3, STATE)

    def test_wrong_state_rows(self, rng):
        g = with_features(random_graph(rng, 4, 0.5), rng)
        with pytest.raises(ValueError):
            rgnn_transition(g, Tensor(np.zeros((3, STATE))), rgnn_params(2))


class TestOutputs:
    def setup_method(self):
        rng = np.random.default_rng(11)
        self.rng = rng
        self.g = with_features(random_graph(rng, 6, 0.5), rng, edge_width=2)
        self.h = rng.normal(size=(6, STATE))

    def _zeroed(self, level):
        p = rgnn_params(2, 2, 2, level)
        for t in p.tensors():
            t.data = np.zeros_like(t.data)
        return p

    def test_zero_params(self):
        assert not output_vertex(Tensor(self.h), self.g, self._zeroed("vertex")).data.any()
        assert not output_edge(Tensor(self.h), self.g, self._zeroed("edge")).data.any()

    def test_vertex_identity_like(self):
        p = rgnn_params(2, 2, STATE, "vertex")
        p["g_w"].data = np.vstack([np.zeros((2, STATE)), np.eye(STATE)])
        p["g_b"].data = np.zeros(STATE)
        assert np.array_equal(output_vertex(Tensor(self.h), self.g, p).data, self.h)

    def test_vertex_dense_oracle(self):
        p = rgnn_params(2, 2, 2, "vertex")
        x = self.g.vertex_features
        expect = np.hstack([x, self.h]) @ p["g_w"].data + p["g_b"].data
        assert np.allclose(output_vertex(Tensor(self.h), self.g, p).data, expect)

    def test_edge_dense_oracle(self):
        p = rgnn_params(2, 2, 2, "edge")
        x, e = self.g.vertex_features, self.g.edge_features
        rows = [np.concatenate([e[k], x[i], self.h[i], x[j], self.h[j]])
                for k, (i, j) in enumerate(self.g.edges.tolist())]
        expect = np.array(rows) @ p["g_w"].data + p["g_b"].data
        assert np.allclose(output_edge(Tensor(self.h), self.g, p).data, expect)

    def test_edge_symmetric_graph(self):
        # endpoints of the 2-path are interchangeable, so swapping the
        # endpoint blocks of the output weights leaves the logits unchanged
        g = build_graph(2, [(0, 1)], vertex_features=np.ones((2, 2)))
        p = rgnn_params(2, 0, 2, "edge")
        h = rgnn_run(g, p, 2)
        out = output_edge(h, g, p).data
        half = p["g_w"].shape[0] // 2
        p["g_w"].data = np.vstack([p["g_w"].data[half:], p["g_w"].data[:half]])
        assert np.allclose(output_edge(h, g, p).data, out, atol=1e-15)

    def test_graph_identical_rows(self):
        p = rgnn_params(2, 0, STATE)
        p["g_w"].data = np.eye(STATE)
        v = np.array([0.3, -1.0, 2.0])
        out = output_graph(Tensor(np.tile(v, (6, 1))), self.g, p).data
        assert out.shape == (STATE,)
        assert np.allclose(out, v)

    def test_graph_zero_states_bias_only(self):
        p = rgnn_params(2, 0, 2)
        p["g_b"].data = np.array([0.5, -0.5])
        assert np.array_equal(output_graph(Tensor(np.zeros((6, STATE))), self.g, p).data, [0.5, -0.5])

    def test_graph_dense_oracle(self):
        p = rgnn_params(2, 0, 2)
        expect = self.h.mean(axis=0) @ p["g_w"].data + p["g_b"].data
        assert np.allclose(output_graph(Tensor(self.h), self.g, p).data, expect)

    def test_graph_batched(self):
        p = rgnn_params(2, 0, 2)
        idx = np.array([0, 0, 1, 1, 1, 1])
        out = output_graph(Tensor(self.h), self.g, p, idx, 2).data
        for k in range(2):
            expect = self.h[idx == k].mean(axis=0) @ p["g_w"].data + p["g_b"].data
            assert np.allclose(out[k], expect)

    def test_graph_empty(self):
        with pytest.raises(ValueError):
            output_graph(Tensor(np.zeros((0, STATE))), self.g, rgnn_params(2))


class TestConvolutions:
    def test_gcn_identity(self, rng):
        g = build_graph(3, [])
        h = rng.normal(size=(3, 3))
        assert np.allclose(gcn_layer(gcn_norm_adjacency(g), h, np.eye(3)).data, h)

    def test_gcn_path_by_hand(self):
        a = gcn_norm_adjacency(build_graph(2, [(0, 1)]))
        assert np.allclose(gcn_layer(a, [[1.0], [0.0]], [[1.0]]).data, [[0.5], [0.5]])

    def test_gcn_dense_oracle(self, rng):
        g = random_graph(rng, 7, 0.4)
        a = gcn_norm_adjacency(g)
        h, w = rng.normal(size=(7, 3)), rng.normal(size=(3, 2))
        assert np.allclose(gcn_layer(a, h, w, "relu").data, np.maximum(a.to_dense() @ h @ w, 0))

    def test_gcn_shape_mismatch(self, rng):
        a = gcn_norm_adjacency(build_graph(3, []))
        with pytest.raises(ValueError):
            gcn_layer(a, np.ones((3, 2)), np.ones((3, 2)))

    def test_sage_mean_edgeless(self, rng):
        g = build_graph(3, [])
        h, ws, wn = rng.normal(size=(3, 2)), rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        assert np.allclose(sage_mean_layer(g, h, ws, wn, "tanh").data, np.tanh(h @ ws))

    def test_sage_mean_complete_identical_rows(self, rng):
        g = build_graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        h = np.tile(rng.normal(size=2), (4, 1))
        out = sage_mean_layer(g, h, rng.normal(size=(2, 3)), rng.normal(size=(2, 3))).data
        assert np.allclose(out, out[0])

    def test_sage_mean_star_oracle(self, rng):
        g = build_graph(4, [(0, 1), (0, 2), (0, 3)])
        h, ws, wn = rng.normal(size=(4, 2)), rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
        expect = np.zeros((4, 3))
        for i in range(4):
            nb = neighbors(g, i)
            mean = sum(h[j] for j in nb) / len(nb)
            expect[i] = h[i] @ ws + mean @ wn
        assert np.allclose(sage_mean_layer(g, h, ws, wn).data, expect)

    def _pool_oracle(self, g, h, wp, bp, ws, wn):
        out = np.zeros((g.n, ws.shape[1]))
        for i in range(g.n):
            nb = neighbors(g, i)
            pooled = np.zeros(wp.shape[1])
            if nb:
                pooled = np.max([np.maximum(h[j] @ wp + bp, 0) for j in nb], axis=0)
            out[i] = h[i] @ ws + pooled @ wn
        return out

    def test_sage_pool_oracle(self, rng):
        g = random_graph(rng, 6, 0.5)
        args = [rng.normal(size=s) for s in [(6, 2), (2, 4), (4,), (2, 3), (4, 3)]]
        assert np.allclose(sage_pool_layer(g, *args).data, self._pool_oracle(g, *args))

    def test_sage_pool_single_neighbor(self, rng):
        g = build_graph(2, [(0, 1)])
        h, wp, bp = rng.normal(size=(2, 2)), rng.normal(size=(2, 3)), rng.normal(size=3)
        ws, wn = np.zeros((2, 3)), np.eye(3)
        out = sage_pool_layer(g, h, wp, bp, ws, wn).data
        assert np.allclose(out[0], np.maximum(h[1] @ wp + bp, 0))

    def test_sage_pool_duplicate_neighbors(self, rng):
        # vertices 1 and 2 carry identical features: pooling over both equals pooling over one
        h = rng.normal(size=(3, 2))
        h[2] = h[1]
        wp, bp, ws, wn = (rng.normal(size=s) for s in [(2, 3), (3,), (2, 2), (3, 2)])
        two = sage_pool_layer(build_graph(3, [(0, 1), (0, 2)]), h, wp, bp, ws, wn).data
        one = sage_pool_layer(build_graph(3, [(0, 1)]), h, wp, bp, ws, wn).data
        assert np.array_equal(two[0], one[0])


def _all_layers(g, h, rng):
    """Outputs of every layer on (g, h) with fixed random parameters."""
    seed = 99
    r = np.random.default_rng(seed)
    gx = build_graph(g.n, g.edges, vertex_features=h)
    p = rgnn_params(h.shape[1], 0, 2, "vertex", seed=seed)
    return {
        "rgnn": rgnn_run(gx, p, 3).values.data,
        "out_vertex": output_vertex(rgnn_run(gx, p, 2), gx, p).data,
        "gcn": gcn_layer(gcn_norm_adjacency(g), h, r.normal(size=(h.shape[1], 3)), "tanh").data,
        "sage_mean": sage_mean_layer(g, h, *r.normal(size=(2, h.shape[1], 3))).data,
        "sage_pool": sage_pool_layer(g, h, r.normal(size=(h.shape[1], 4)), r.normal(size=4),
                                     r.normal(size=(h.shape[1], 3)), r.normal(size=(4, 3))).data,
    }


class TestProperties:
    @pytest.mark.property
    @given(graphs(max_n=12), st.integers(0, 2**31 - 1))
    def test_permutation_equivariance(self, g, seed):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=(g.n, 2))
        perm = rng.permutation(g.n)
        base = _all_layers(g, h, rng)
        hp = np.empty_like(h)
        hp[perm] = h
        moved = _all_layers(permute(g, perm), hp, rng)
        for name in base:
            expect = np.empty_like(base[name])
            expect[perm] = base[name]
            assert np.allclose(moved[name], expect, rtol=0, atol=1e-12), name

    @pytest.mark.property
    @given(graphs(min_n=2, max_n=10), st.integers(0, 2**31 - 1))
    def test_edge_order_invariance(self, g, seed):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=(g.n, 2))
        shuffled = g.edges[rng.permutation(g.m)][:, ::-1] if g.m else g.edges
        g2 = build_graph(g.n, shuffled)
        a, b = _all_layers(g, h, rng), _all_layers(g2, h, rng)
        for name in a:
            assert np.array_equal(a[name], b[name]), name

    @pytest.mark.property
    @given(st.integers(0, 2**31 - 1), st.integers(1, 4))
    def test_scatter_order_invariance(self, seed, d):
        rng = np.random.default_rng(seed)
        k, n = 12, 4
        msg, idx = rng.normal(size=(k, d)), rng.integers(0, n, size=k)
        order = rng.permutation(k)
        add1 = ag.scatter_add_rows(msg, idx, n).data
        add2 = ag.scatter_add_rows(msg[order], idx[order], n).data
        assert np.allclose(add1, add2, rtol=0, atol=1e-12)
        assert np.array_equal(ag.scatter_max_rows(msg, idx, n).data,
                              ag.scatter_max_rows(msg[order], idx[order], n).data)

    @pytest.mark.property
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_locality_on_path(self, k):
        rng = np.random.default_rng(k)
        n = 9
        g = build_graph(n, [(i, i + 1) for i in range(n - 1)])
        h = rng.normal(size=(n, 2))
        far = n - 1          # vertex 0 is 8 hops from the far end
        h2 = h.copy()
        h2[far] += 10.0
        gx, gx2 = (build_graph(n, g.edges, vertex_features=x) for x in (h, h2))
        p = rgnn_params(2)
        a = rgnn_run(gx, p, k).values.data
        b = rgnn_run(gx2, p, k).values.data
        near = [i for i in range(n) if far - i > k]
        assert np.array_equal(a[near], b[near])
        assert not np.array_equal(a[far - 1], b[far - 1])
        # stacked convolutions: k layers reach exactly k hops
        w = rng.normal(size=(2, 2))
        a_norm = gcn_norm_adjacency(g)
        x1, x2 = Tensor(h), Tensor(h2)
        for _ in range(k):
            x1, x2 = gcn_layer(a_norm, x1, w, "tanh"), gcn_layer(a_norm, x2, w, "tanh")
            x1 = sage_mean_layer(g, x1, np.eye(2), w, "tanh")
            x2 = sage_mean_layer(g, x2, np.eye(2), w, "tanh")
        near2 = [i for i in range(n) if far - i > 2 * k]
        assert np.array_equal(x1.data[near2], x2.data[near2])
