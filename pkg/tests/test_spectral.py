import numpy as np
import pytest
from hypothesis import given, strategies as st

from gnnkit.fixtures import worked_example
from gnnkit.graph import adjacency, build_graph, connected_components, laplacian
from gnnkit.spectral import (ConvergenceError, SpectralError, cheb_filter, chebyshev_response,
                             eigensystem, gcn_norm_adjacency, gft, graph_eigensystem, igft,
                             jacobi_eigh, lambda_max, spectral_convolve, spectral_layer_forward)

from conftest import graphs, random_graph


def path2_lap():
    return np.array([[1.0, -1.0], [-1.0, 1.0]])


def projector(vecs):
    return vecs @ vecs.T


class TestEigensystem:
    def test_path2(self):
        es = eigensystem(path2_lap())
        assert np.allclose(es.eigenvalues, [0, 2], atol=1e-14)
        assert np.allclose(es.eigenvectors[:, 0], np.ones(2) / np.sqrt(2))

    def test_two_by_two_by_hand(self):
        # characteristic polynomial (2 - x)^2 - 1 has roots 1 and 3
        assert np.allclose(eigensystem(np.array([[2.0, -1.0], [-1.0, 2.0]])).eigenvalues, [1, 3])

    def test_worked_example_against_lapack(self):
        lap = laplacian(worked_example())
        es = eigensystem(lap)
        assert np.allclose(es.eigenvalues, np.linalg.eigvalsh(lap), atol=1e-8)

    def test_sign_convention(self, rng):
        lap = laplacian(random_graph(rng, 9, 0.4, connected=True))
        u = eigensystem(lap).eigenvectors
        for k in range(u.shape[1]):
            first = u[np.nonzero(np.abs(u[:, k]) > 1e-12)[0][0], k]
            assert first > 0

    def test_asymmetric_rejected(self):
        with pytest.raises(SpectralError):
            eigensystem(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_size_cap(self):
        with pytest.raises(SpectralError):
            eigensystem(np.eye(5), max_n=4)

    def test_sweep_cap_reports_nonconvergence(self, rng):
        a = rng.normal(size=(12, 12))
        with pytest.raises(ConvergenceError):
            jacobi_eigh(a + a.T, max_sweeps=1)

    def test_one_by_one(self):
        es = eigensystem(np.array([[4.0]]))
        assert es.eigenvalues.tolist() == [4.0]
        assert es.eigenvectors.tolist() == [[1.0]]

    @given(graphs(min_n=2, max_n=15))
    def test_invariants(self, g):
        lap = laplacian(g)
        es = eigensystem(lap)
        u = es.eigenvectors
        assert np.all(np.diff(es.eigenvalues) >= -1e-12)
        assert np.allclose(u.T @ u, np.eye(g.n), atol=1e-8)
        err = np.linalg.norm(es.reconstruct() - lap) / max(np.linalg.norm(lap), 1e-300)
        assert err < 1e-8 or np.linalg.norm(lap) == 0

    @given(graphs(min_n=2, max_n=15))
    def test_zero_multiplicity_counts_components(self, g):
        vals = eigensystem(laplacian(g)).eigenvalues
        assert np.sum(np.abs(vals) < 1e-8) == connected_components(g).max() + 1

    def test_degenerate_block_projector(self):
        # the complete graph K4 has eigenvalue 4 with multiplicity 3
        g = build_graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        es = eigensystem(laplacian(g))
        block = es.eigenvectors[:, 1:]
        expected = np.eye(4) - np.full((4, 4), 0.25)
        assert np.allclose(projector(block), expected, atol=1e-10)

    def test_connected_constant_nullvector(self, rng):
        g = random_graph(rng, 10, 0.3, connected=True)
        es = eigensystem(laplacian(g))
        assert abs(es.eigenvalues[0]) < 1e-10
        assert np.allclose(es.eigenvectors[:, 0], np.full(10, 10 ** -0.5))


class TestTransform:
    def setup_method(self):
        self.g = random_graph(np.random.default_rng(3), 10, 0.3, connected=True)
        self.es = graph_eigensystem(self.g, "unnormalized")

    def test_constant_signal(self):
        fhat = gft(self.es, np.full(10, 2.5))
        assert np.isclose(abs(fhat[0]), 2.5 * np.sqrt(10))
        assert np.allclose(fhat[1:], 0, atol=1e-12)

    def test_eigenvector_maps_to_basis(self):
        for k in (0, 4, 9):
            fhat = gft(self.es, self.es.eigenvectors[:, k])
            assert np.allclose(np.abs(fhat), np.eye(10)[k], atol=1e-12)

    def test_worked_example_first_signal(self):
        g = worked_example()
        es = graph_eigensystem(g, "unnormalized")
        f1 = np.array([0.2, 0.4, 0.3, 0.3, 0.1])
        u = es.eigenvectors
        brute = [sum(u[i, k] * f1[i] for i in range(5)) for k in range(5)]
        assert np.allclose(gft(es, f1), brute, atol=1e-14)

    def test_round_trip_and_zero(self, rng):
        f = rng.normal(size=10)
        assert np.allclose(igft(self.es, gft(self.es, f)), f, atol=1e-8)
        assert np.array_equal(igft(self.es, np.zeros(10)), np.zeros(10))

    def test_basis_column(self):
        assert np.allclose(igft(self.es, np.eye(10)[3]), self.es.eigenvectors[:, 3])

    def test_dimension_mismatch(self):
        with pytest.raises(SpectralError):
            gft(self.es, np.ones(9))
        with pytest.raises(SpectralError):
            igft(self.es, np.ones(11))

    @given(graphs(min_n=2, max_n=50), st.integers(0, 2**31 - 1))
    def test_round_trip_and_parseval(self, g, seed):
        es = graph_eigensystem(g, "unnormalized")
        f = np.random.default_rng(seed).normal(size=g.n)
        fhat = gft(es, f)
        assert np.max(np.abs(igft(es, fhat) - f)) < 1e-8
        assert abs(np.linalg.norm(fhat) - np.linalg.norm(f)) < 1e-8


class TestConvolution:
    def setup_method(self):
        self.g = random_graph(np.random.default_rng(5), 8, 0.4, connected=True)
        self.lap = laplacian(self.g)
        self.es = eigensystem(self.lap)

    def test_identity_filter(self, rng):
        f = rng.normal(size=8)
        assert np.allclose(spectral_convolve(self.es, f, np.ones(8)), f)

    def test_eigenvalue_filter_is_laplacian(self, rng):
        f = rng.normal(size=8)
        assert np.allclose(spectral_convolve(self.es, f, self.es.eigenvalues), self.lap @ f, atol=1e-8)

    def test_triangle_constant_projection(self):
        tri = build_graph(3, [(0, 1), (1, 2), (0, 2)])
        es = graph_eigensystem(tri, "unnormalized")
        f = np.array([3.0, 0.0, 6.0])
        assert np.allclose(spectral_convolve(es, f, [1, 0, 0]), [3, 3, 3])

    def test_length_mismatch(self):
        with pytest.raises(SpectralError):
            spectral_convolve(self.es, np.ones(8), np.ones(7))


class TestSpectralLayer:
    def setup_method(self):
        self.g = random_graph(np.random.default_rng(8), 7, 0.4, connected=True)
        self.es = graph_eigensystem(self.g, "unnormalized")

    def test_identity(self, rng):
        h = rng.normal(size=(7, 1))
        out = spectral_layer_forward(h, np.ones((1, 1, 7)), self.es)
        assert np.allclose(out, h)

    def test_zero_filters(self, rng):
        out = spectral_layer_forward(rng.normal(size=(7, 2)), np.zeros((2, 1, 7)), self.es)
        assert np.allclose(out, 0, atol=1e-15)

    def test_laplacian_filter(self, rng):
        h = rng.normal(size=(7, 1))
        out = spectral_layer_forward(h, self.es.eigenvalues[None, None, :], self.es)
        assert np.allclose(out, laplacian(self.g) @ h, atol=1e-8)

    def test_channel_mixing_matches_loop(self, rng):
        h = rng.normal(size=(7, 3))
        th = rng.normal(size=(3, 2, 7))
        u = self.es.eigenvectors
        expect = np.zeros((7, 2))
        for j in range(2):
            for i in range(3):
                expect[:, j] += u @ np.diag(th[i, j]) @ u.T @ h[:, i]
        assert np.allclose(spectral_layer_forward(h, th, self.es, "relu"), np.maximum(expect, 0))

    def test_shape_mismatch(self, rng):
        with pytest.raises(SpectralError):
            spectral_layer_forward(rng.normal(size=(7, 2)), np.ones((3, 1, 7)), self.es)

    def test_default_kind_is_symmetric(self):
        es = graph_eigensystem(self.g)
        assert np.allclose(es.reconstruct(), laplacian(self.g, "symmetric"), atol=1e-10)


class TestChebyshev:
    def setup_method(self):
        self.lap = path2_lap()

    def test_t0_identity(self):
        assert np.allclose(cheb_filter(self.lap, [1.0], [1.0, 0.0]), [1, 0])

    def test_t1(self, rng):
        g = random_graph(rng, 6, 0.5, connected=True)
        lap = laplacian(g)
        lmax = np.linalg.eigvalsh(lap)[-1]
        f = rng.normal(size=6)
        expect = (2 * lap / lmax - np.eye(6)) @ f
        assert np.allclose(cheb_filter(lap, [0, 1], f, lam_max=lmax), expect)

    def test_t2_path_by_hand(self):
        # lambda_max = 2 so L~ = L - I = [[0,-1],[-1,0]]; L~^2 = I; 2 L~^2 f - f = f
        out = cheb_filter(self.lap, [0, 0, 1], [1.0, 0.0])
        assert np.allclose(out, [1.0, 0.0], atol=1e-7)

    def test_empty_coefficients(self):
        with pytest.raises(SpectralError):
            cheb_filter(self.lap, [], [1.0, 0.0])

    def test_lambda_max_power_iteration(self, rng):
        lap = laplacian(random_graph(rng, 20, 0.3, connected=True))
        assert abs(lambda_max(lap) - np.linalg.eigvalsh(lap)[-1]) < 1e-6

    def test_sparse_laplacian_accepted(self, rng):
        from gnnkit.graph import SparseMatrix
        lap = laplacian(random_graph(rng, 8, 0.4, connected=True))
        f = rng.normal(size=8)
        c = [0.5, -1.0, 0.25]
        assert np.allclose(cheb_filter(SparseMatrix.from_dense(lap), c, f, 5.0),
                           cheb_filter(lap, c, f, 5.0))

    @given(graphs(min_n=2, max_n=30, connected=True), st.integers(0, 2**31 - 1))
    def test_matches_spectral_convolution(self, g, seed):
        rng = np.random.default_rng(seed)
        lap = laplacian(g)
        es = eigensystem(lap)
        c = rng.normal(size=int(rng.integers(1, 6)))
        f = rng.normal(size=g.n)
        lmax = lambda_max(lap)
        ghat = chebyshev_response(c, es.eigenvalues, lmax)
        assert np.max(np.abs(cheb_filter(lap, c, f, lmax) - spectral_convolve(es, f, ghat))) < 1e-6


class TestGcnNorm:
    def test_path2(self):
        a = gcn_norm_adjacency(build_graph(2, [(0, 1)])).to_dense()
        assert np.allclose(a, [[0.5, 0.5], [0.5, 0.5]])

    def test_single_vertex(self):
        assert gcn_norm_adjacency(build_graph(1, [])).to_dense().tolist() == [[1.0]]

    def test_edgeless_identity(self):
        assert np.array_equal(gcn_norm_adjacency(build_graph(3, [])).to_dense(), np.eye(3))

    @given(graphs())
    def test_symmetric_and_matches_formula(self, g):
        a = gcn_norm_adjacency(g).to_dense()
        tilde = adjacency(g) + np.eye(g.n)
        d = tilde.sum(axis=1) ** -0.5
        assert np.allclose(a, d[:, None] * tilde * d[None, :], atol=1e-15)
        assert np.array_equal(a, a.T)
