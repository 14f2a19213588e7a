"""Graph autoencoders: GCN encoders, inner-product decoder and their losses."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .graph import Graph, SparseMatrix, adjacency_sparse
from .layers import ModelParams, gcn_layer
from .spectral import gcn_norm_adjacency

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0


@dataclass
class LatentEmbedding:
    z: Tensor
    mu: Optional[Tensor] = None
    logvar: Optional[Tensor] = None
    noise: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.z.shape[1]


def init_gae_params(params: ModelParams, in_dim: int, hidden: int = 32, latent: int = 16,
                    variational: bool = False) -> ModelParams:
    params.weight("enc_w0", in_dim, hidden)
    if variational:
        params.weight("enc_mu", hidden, latent)
        params.weight("enc_logvar", hidden, latent)
    else:
        params.weight("enc_w1", hidden, latent)
    return params


def _features(g: Graph, x) -> Tensor:
    x = g.vertex_features if x is None else x
    if x is None:
        raise ValueError("encoder needs vertex features")
    x = ag.as_tensor(x)
    if x.shape[0] != g.n:
        raise ValueError(f"features have {x.shape[0]} rows, graph has {g.n} vertices")
    return x


def gae_encode(g: Graph, x, params: ModelParams, a_norm: Optional[SparseMatrix] = None) -> LatentEmbedding:
    """Two GCN layers (relu, then linear) from features to latent vectors."""
    a_norm = gcn_norm_adjacency(g) if a_norm is None else a_norm
    h = gcn_layer(a_norm, _features(g, x), params["enc_w0"], "relu")
    return LatentEmbedding(gcn_layer(a_norm, h, params["enc_w1"]))


def vgae_encode(g: Graph, x, params: ModelParams, seed: Optional[int] = None,
                a_norm: Optional[SparseMatrix] = None, sample: bool = True) -> LatentEmbedding:
    """Shared GCN layer, then separate mean and log-variance GCN heads.

    ``z = mu + exp(logvar / 2) * noise`` with standard normal noise drawn from
    ``seed``; ``sample=False`` returns ``z = mu``. Log-variances are clamped
    to ``[-10, 10]``.
    """
    a_norm = gcn_norm_adjacency(g) if a_norm is None else a_norm
    h = gcn_layer(a_norm, _features(g, x), params["enc_w0"], "relu")
    mu = gcn_layer(a_norm, h, params["enc_mu"])
    logvar = ag.clip(gcn_layer(a_norm, h, params["enc_logvar"]), LOGVAR_MIN, LOGVAR_MAX)
    if not sample:
        return LatentEmbedding(mu, mu, logvar, np.zeros(mu.shape))
    noise = np.random.default_rng(seed).standard_normal(mu.shape)
    z = ag.add(mu, ag.elementwise_mul(ag.exp(ag.scale(logvar, 0.5)), noise))
    return LatentEmbedding(z, mu, logvar, noise)


def inner_product_decode(z) -> Tensor:
    """Edge probabilities ``sigmoid(z_i . z_j)`` for every vertex pair."""
    z = ag.as_tensor(z)
    return ag.sigmoid(z @ ag.transpose(z))


def reconstruction_target(g: Graph) -> np.ndarray:
    """Dense adjacency with ones on the diagonal."""
    a = adjacency_sparse(g, weighted=False).to_dense()
    np.fill_diagonal(a, 1.0)
    return a


def default_pos_weight(a) -> float:
    """``(N^2 - M') / M'`` where ``M'`` counts the positive entries of ``a``."""
    if isinstance(a, SparseMatrix):
        total, pos = a.shape[0] * a.shape[1], a.nnz
    else:
        a = np.asarray(a)
        total, pos = a.size, int(np.count_nonzero(a))
    if pos == 0:
        raise ValueError("target has no positive entries")
    return (total - pos) / pos


def gae_loss(ahat, a, pos_weight: Optional[float] = None) -> Tensor:
    """Mean weighted binary cross-entropy between predicted and true adjacency.

    Positive entries are weighted by ``pos_weight`` (default from
    :func:`default_pos_weight`).
    """
    ahat = ag.as_tensor(ahat)
    a = np.asarray(a, dtype=np.float64)
    if ahat.shape != a.shape:
        raise ValueError(f"prediction {ahat.shape} and target {a.shape} differ in shape")
    if np.any(ahat.data < 0) or np.any(ahat.data > 1) or np.any(np.isnan(ahat.data)):
        raise ValueError("predicted probabilities must lie in (0, 1)")
    w = default_pos_weight(a) if pos_weight is None else pos_weight
    pos = ag.elementwise_mul(ag.log(ahat), w * a)
    neg = ag.elementwise_mul(ag.log(1.0 - ahat), 1.0 - a)
    return ag.scale(ag.mean_all(ag.add(pos, neg)), -1.0)


def kl_divergence(mu, logvar) -> Tensor:
    """Mean over vertices of KL(N(mu_i, diag exp(logvar_i)) || N(0, I))."""
    mu, logvar = ag.as_tensor(mu), ag.as_tensor(logvar)
    n = mu.shape[0]
    terms = ag.add(ag.add(ag.elementwise_mul(mu, mu), ag.exp(logvar)), ag.scale(logvar, -1.0))
    return ag.scale(ag.sum_all(ag.shift(terms, -1.0)), 0.5 / n)


def vgae_loss(ahat, a, mu, logvar, pos_weight: Optional[float] = None) -> Tensor:
    return ag.add(gae_loss(ahat, a, pos_weight), kl_divergence(mu, logvar))


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def decoder_bce_loss(z, target: SparseMatrix, pos_weight: Optional[float] = None,
                     block: int = 512) -> Tensor:
    """``gae_loss(inner_product_decode(z), target)`` computed in row blocks.

    Works on logits and never forms the full ``N x N`` matrix, so memory
    stays at ``block x N``. Per entry the loss is
    ``softplus(x) + t * (w * softplus(-x) - softplus(x))``: the first term is
    summed densely, the second only where the target ``t`` is nonzero. The
    gradient is accumulated during the same pass.
    """
    z = ag.as_tensor(z)
    n = z.shape[0]
    if target.shape != (n, n):
        raise ValueError(f"target {target.shape} does not match {n} embeddings")
    w = default_pos_weight(target) if pos_weight is None else pos_weight
    zd = z.data
    total = 0.0
    grad = np.zeros_like(zd)
    # x = z z^T is symmetric: visit only columns >= lo and count the
    # off-diagonal part twice. grad collects (P z) with P = sigmoid(x).
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        x = zd[lo:hi] @ zd[lo:].T
        e = np.exp(-np.abs(x))
        sp = np.maximum(x, 0.0) + np.log1p(e)
        width = hi - lo
        total += float(np.sum(sp[:, :width]) + 2.0 * np.sum(sp[:, width:]))
        p = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        grad[lo:hi] += p @ zd[lo:]
        grad[hi:] += p[:, width:].T @ zd[lo:hi]
    grad *= 2.0

    coo = target._csr.tocoo()
    r, c, t = coo.row, coo.col, coo.data
    xs = np.einsum("ij,ij->i", zd[r], zd[c])
    total += float(np.sum(t * (w * _softplus(-xs) - _softplus(xs))))
    ps = _sigmoid(xs)
    coef = t * (w * (ps - 1.0) - ps)
    np.add.at(grad, r, coef[:, None] * zd[c])
    np.add.at(grad, c, coef[:, None] * zd[r])

    scale = 1.0 / (n * n)
    grad *= scale

    def back(g):
        return (grad * float(g),)

    return ag.record(np.array(total * scale), "decoder_bce_loss", (z,), back)


def score_pairs(z, pairs) -> np.ndarray:
    """Decoder probabilities for the given vertex pairs only."""
    z = z.data if isinstance(z, Tensor) else np.asarray(z)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    x = np.einsum("ij,ij->i", z[pairs[:, 0]], z[pairs[:, 1]])
    return 1.0 / (1.0 + np.exp(-x))


def write_embeddings_csv(path, z) -> Path:
    z = z.data if isinstance(z, Tensor) else np.asarray(z)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id"] + [f"dim_{k}" for k in range(z.shape[1])])
        for i, row in enumerate(z):
            w.writerow([i] + [repr(float(v)) for v in row])
    return path


def read_embeddings_csv(path) -> np.ndarray:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        if not header or header[0] != "vertex_id":
            raise ValueError(f"{path}: missing vertex_id header")
        rows = [[float(v) for v in line[1:]] for line in r]
    return np.array(rows).reshape(len(rows), len(header) - 1)
