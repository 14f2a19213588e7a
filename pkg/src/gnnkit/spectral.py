"""Graph signal processing on the Laplacian eigenbasis.

The eigensolver is a cyclic Jacobi method. Rotations are scheduled with a
round-robin (tournament) ordering so every round touches disjoint index
pairs and can be applied to all rows and columns at once with numpy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .graph import Graph, GraphError, SparseMatrix, adjacency_sparse, laplacian

log = logging.getLogger(__name__)

DEFAULT_MAX_N = 3000


class SpectralError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Eigensystem:
    """Ascending eigenvalues and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings covering every unordered pair exactly once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.int64), np.array(q, dtype=np.int64)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Stops when the off-diagonal Frobenius norm falls below ``tol`` times the
    matrix's Frobenius norm. Returns ``(eigenvalues, eigenvectors, sweeps)``,
    unsorted.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    vt = np.eye(n)  # transposed eigenvector matrix; rows are rotated in place
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    if n < 2 or _off_norm(a) <= tol * scale:
        return np.diag(a).copy(), vt, 0
    rounds = _round_robin(n)

    def rotate_rows(m, p, q, c, s):
        rp, rq = m[p, :], m[q, :]
        m[p, :], m[q, :] = c * rp - s * rq, s * rp + c * rq

    for sweep in range(1, max_sweeps + 1):
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            th = np.where(big, 1.0, theta)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                         np.sign(th) / (np.abs(th) + np.sqrt(th * th + 1.0)))
            t[theta == 0] = 1.0
            c = (1.0 / np.sqrt(t * t + 1.0))[:, None]
            s = t[:, None] * c
            # J^T A J as two row passes: rows of J^T A, then rows of (J^T A)^T = A^T J
            rotate_rows(a, p, q, c, s)
            a = np.ascontiguousarray(a.T)
            rotate_rows(a, p, q, c, s)
            a[p, q] = 0.0
            a[q, p] = 0.0
            rotate_rows(vt, p, q, c, s)
        if _off_norm(a) <= tol * scale:
            return np.diag(a).copy(), vt.T.copy(), sweep
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps "
                           f"(off-diagonal norm {_off_norm(a):.3e})")


def _fix_signs(u: np.ndarray) -> np.ndarray:
    u = u.copy()
    for k in range(u.shape[1]):
        col = u[:, k]
        nz = np.nonzero(np.abs(col) > 1e-10 * max(np.abs(col).max(), 1e-300))[0]
        if len(nz) and col[nz[0]] < 0:
            u[:, k] = -col
    return u


def eigensystem(lap: np.ndarray, *, max_n: int = DEFAULT_MAX_N, tol: float = 1e-10,
                max_sweeps: int = 100) -> Eigensystem:
    lap = np.asarray(lap, dtype=np.float64)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {lap.shape}")
    n = lap.shape[0]
    if n > max_n:
        raise SpectralError(f"N={n} exceeds the eigensolver cap of {max_n}")
    if not np.all(np.isfinite(lap)):
        raise SpectralError("matrix has non-finite entries")
    asym = np.abs(lap - lap.T).max() if n else 0.0
    if asym > 1e-10:
        raise SpectralError(f"matrix is not symmetric (max |L - L^T| = {asym:.3e})")
    vals, vecs, sweeps = jacobi_eigh(0.5 * (lap + lap.T), tol=tol, max_sweeps=max_sweeps)
    order = np.argsort(vals, kind="stable")
    return Eigensystem(vals[order], _fix_signs(vecs[:, order]), sweeps)


def graph_eigensystem(g: Graph, kind: str = "symmetric", **kw) -> Eigensystem:
    return eigensystem(laplacian(g, kind), **kw)


def _signal(es: Eigensystem, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != es.n:
        raise SpectralError(f"signal has length {f.shape[0]}, graph has {es.n} vertices")
    return f


def gft(es: Eigensystem, f) -> np.ndarray:
    """Expand a signal (or the columns of a signal matrix) in the eigenbasis."""
    return es.eigenvectors.T @ _signal(es, f)


def igft(es: Eigensystem, fhat) -> np.ndarray:
    return es.eigenvectors @ _signal(es, fhat)


def spectral_convolve(es: Eigensystem, f, ghat) -> np.ndarray:
    """Filter ``f`` by scaling its Fourier coefficients with ``ghat``."""
    f = _signal(es, f)
    ghat = np.asarray(ghat, dtype=np.float64)
    if ghat.shape != (es.n,):
        raise SpectralError(f"filter has shape {ghat.shape}, expected ({es.n},)")
    fhat = gft(es, f)
    return igft(es, (ghat * fhat.T).T)


Activation = Union[str, Callable[[np.ndarray], np.ndarray], None]

_ACTIVATIONS = {
    None: lambda x: x,
    "identity": lambda x: x,
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
}


def spectral_layer_forward(h_prev, thetas, es: Eigensystem, activation: Activation = None) -> np.ndarray:
    """One spectral convolution layer.

    ``thetas`` has shape ``(f_in, f_out, N)``: one diagonal filter per pair of
    input and output channels. Output channel ``j`` is the activation of the
    sum over input channels ``i`` of ``U diag(thetas[i, j]) U^T h_prev[:, i]``.
    """
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if h_prev.ndim == 1:
        h_prev = h_prev[:, None]
    thetas = np.asarray(thetas, dtype=np.float64)
    if h_prev.shape[0] != es.n:
        raise SpectralError(f"input has {h_prev.shape[0]} rows, graph has {es.n} vertices")
    if thetas.ndim != 3 or thetas.shape[0] != h_prev.shape[1] or thetas.shape[2] != es.n:
        raise SpectralError(f"filters of shape {thetas.shape} do not fit input {h_prev.shape}")
    act = activation if callable(activation) else _ACTIVATIONS.get(activation)
    if act is None:
        raise SpectralError(f"unknown activation {activation!r}")
    hhat = gft(es, h_prev)                          # N x f_in
    out_hat = np.einsum("ki,ijk->kj", hhat, thetas)  # N x f_out
    return act(igft(es, out_hat))


def lambda_max(lap, tol: float = 1e-8, max_iter: int = 10000, seed: int = 0) -> float:
    """Largest eigenvalue of a positive semidefinite matrix by power iteration."""
    mul = lap.matmul if isinstance(lap, SparseMatrix) else np.asarray(lap, dtype=np.float64).__matmul__
    n = lap.shape[0]
    x = np.random.default_rng(seed).uniform(0.5, 1.5, n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = mul(x)
        new = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(new - est) <= tol * max(abs(new), 1.0):
            return new
        est = new
    log.warning("power iteration hit %d iterations (last change above %g)", max_iter, tol)
    return est


def cheb_filter(lap, coeffs, f, lam_max: Optional[float] = None) -> np.ndarray:
    """Apply the Chebyshev polynomial filter ``sum_k c_k T_k(L~) f``.

    ``L~ = 2 L / lam_max - I``. The largest eigenvalue is estimated by power
    iteration when not supplied.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    if len(coeffs) == 0:
        raise SpectralError("at least one Chebyshev coefficient is required")
    dense = not isinstance(lap, SparseMatrix)
    if dense:
        lap = np.asarray(lap, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != lap.shape[0]:
        raise SpectralError(f"signal has length {f.shape[0]}, Laplacian is {lap.shape}")
    if lam_max is None:
        lam_max = lambda_max(lap)
    if lam_max <= 0:
        raise SpectralError("largest eigenvalue must be positive for Chebyshev scaling")
    mul = lap.__matmul__ if dense else lap.matmul

    def scaled(x):
        return (2.0 / lam_max) * mul(x) - x

    t_prev, t_cur = f, None
    out = coeffs[0] * t_prev
    if len(coeffs) > 1:
        t_cur = scaled(f)
        out = out + coeffs[1] * t_cur
    for c in coeffs[2:]:
        t_prev, t_cur = t_cur, 2.0 * scaled(t_cur) - t_prev
        out = out + c * t_cur
    return out


def chebyshev_response(coeffs, eigenvalues, lam_max: float) -> np.ndarray:
    """Frequency response ``sum_j c_j T_j(2 lambda / lam_max - 1)`` per eigenvalue."""
    x = 2.0 * np.asarray(eigenvalues, dtype=np.float64) / lam_max - 1.0
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return np.polynomial.chebyshev.chebval(x, coeffs)


def gcn_norm_adjacency(g: Graph) -> SparseMatrix:
    """``D~^-1/2 (A + I) D~^-1/2`` where ``D~`` is the degree matrix of ``A + I``.

    Existing self-loops are replaced by the unit loop rather than doubled.
    """
    a = adjacency_sparse(g)._csr.tolil()
    a.setdiag(1.0)
    a = a.tocsr()
    d = np.asarray(a.sum(axis=1)).reshape(-1)
    s = 1.0 / np.sqrt(d)
    norm = a.multiply(s[:, None]).multiply(s[None, :]).tocsr()
    norm.sort_indices()
    return SparseMatrix(norm.indptr, norm.indices, norm.data, (g.n, g.n))


__all__ = [
    "Eigensystem", "SpectralError", "ConvergenceError", "GraphError", "jacobi_eigh", "eigensystem",
    "graph_eigensystem", "gft", "igft", "spectral_convolve", "spectral_layer_forward",
    "lambda_max", "cheb_filter", "chebyshev_response", "gcn_norm_adjacency",
]
