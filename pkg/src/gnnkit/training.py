"""Losses, optimizers, models and the three experiment drivers.

* graph classification with a recurrent GNN (fixed number of transitions,
  mean readout, linear output),
* vertex classification with two GraphSAGE layers,
* link prediction with a (variational) graph autoencoder.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import autograd as ag
from . import data as D
from .autoencoder import (LatentEmbedding, decoder_bce_loss, gae_encode, init_gae_params,
                          kl_divergence, score_pairs, vgae_encode)
from .autograd import Tensor
from .graph import Graph, SparseMatrix, adjacency_sparse, build_graph, disjoint_union
from .layers import (CONSTANT_EMBED_SIZE, ModelParams, edge_feature_size, init_rgnn_params,
                     neighbor_mean_operator, output_graph, rgnn_run, sage_mean_layer, sage_pool_layer)
from .metrics import MetricError, average_precision, multiclass_accuracy, roc_auc
from .spectral import gcn_norm_adjacency

log = logging.getLogger(__name__)

TASKS = ("graph", "node", "link")
DATASETS = {
    "graph": ("structural", "two_clique", "stargazers"),
    "node": ("cora", "citeseer", "pubmed", "two_clique", "planted"),
    "link": ("cora", "citeseer", "pubmed", "two_clique", "planted"),
}


class ConfigError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


# --- configuration and reports -------------------------------------------------

@dataclass
class TrainConfig:
    task: str = "link"
    dataset: str = "two_clique"
    epochs: Optional[int] = None
    lr: float = 0.01
    optimizer: str = "adam"
    seed: int = 0
    hidden: Optional[int] = None
    transitions: int = 1
    latent: int = 16
    model: str = "gae"
    aggregator: str = "mean"
    pool_dim: int = 64
    weight_decay: Optional[float] = None
    dropout: Optional[float] = None
    batch_size: int = 64
    test_fraction: float = 0.2
    kl_weight: Optional[float] = None
    data_dir: Optional[str] = None
    synth_size: int = 200
    repeats: int = 1

    _DEFAULTS = {
        "graph": {"epochs": 60, "hidden": 16, "weight_decay": 0.0, "dropout": 0.0},
        "node": {"epochs": 120, "hidden": 16, "weight_decay": 5e-4, "dropout": 0.5},
        "link": {"epochs": 200, "hidden": 32, "weight_decay": 0.0, "dropout": 0.0},
    }

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task: unknown task {self.task!r}; expected one of {TASKS}")
        for key, value in self._DEFAULTS[self.task].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.dataset not in DATASETS[self.task]:
            raise ConfigError(f"dataset: unknown dataset {self.dataset!r} for task "
                              f"{self.task!r}; expected one of {DATASETS[self.task]}")
        for key in ("epochs", "hidden", "transitions", "latent", "pool_dim", "batch_size",
                    "synth_size", "repeats"):
            if not isinstance(getattr(self, key), int) or getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be an integer >= 1, got {getattr(self, key)!r}")
        if not self.lr > 0:
            raise ConfigError(f"lr: must be > 0, got {self.lr}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer: expected 'sgd' or 'adam', got {self.optimizer!r}")
        if self.model not in ("gae", "vgae"):
            raise ConfigError(f"model: expected 'gae' or 'vgae', got {self.model!r}")
        if self.aggregator not in ("mean", "pool"):
            raise ConfigError(f"aggregator: expected 'mean' or 'pool', got {self.aggregator!r}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout: must lie in [0, 1), got {self.dropout}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction: must lie in (0, 1), got {self.test_fraction}")
        if self.kl_weight is not None and self.kl_weight < 0:
            raise ConfigError(f"kl_weight: must be >= 0, got {self.kl_weight}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay: must be >= 0, got {self.weight_decay}")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        unknown = sorted(set(raw) - set(cls.field_names()))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        clean = {}
        for k, v in raw.items():
            clean[k] = _coerce(k, v, types[k])
        return cls(**clean)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "TrainConfig":
        return TrainConfig.from_dict({**self.to_dict(), **kw})


def _coerce(key, value, typ):
    typ = str(typ)
    try:
        if value is None:
            return None
        if "int" in typ and not isinstance(value, bool):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if "float" in typ:
            return float(value)
        if "str" in typ:
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {typ}") from None
    return value


@dataclass
class EvalReport:
    task: str
    losses: list
    metrics: dict
    wall_time: float
    config: dict
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path


def append_metrics_row(path, report: EvalReport) -> Path:
    """Append one row (task, dataset, seed, metrics...) to a CSV results ledger."""
    path = Path(path)
    row = {"task": report.task, "dataset": report.config.get("dataset"),
           "model": report.config.get("model") if report.task == "link" else
           report.config.get("aggregator") if report.task == "node" else
           f"x{report.config.get('transitions')}",
           "seed": report.config.get("seed"), "epochs": report.config.get("epochs")}
    row.update({k: v for k, v in sorted(report.metrics.items())})
    new = not path.exists()
    if not new:
        with path.open() as fh:
            header = next(csv.reader(fh), None)
        if header and header != list(row):
            raise TrainingError(f"{path}: existing columns {header} differ from {list(row)}")
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row))
        if new:
            w.writeheader()
        w.writerow(row)
    return path


# --- losses ----------------------------------------------------------------------

def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under ``softmax(logits)``."""
    logits = ag.as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"{labels.shape[0] if labels.ndim else 0} labels for {n} rows")
    if n == 0:
        raise ValueError("cross_entropy of an empty batch")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    logp = ag.log(ag.softmax_rows(logits))
    return ag.scale(ag.sum_all(ag.elementwise_mul(logp, onehot)), -1.0 / n)


def mse(x, xhat) -> Tensor:
    x, xhat = ag.as_tensor(x), ag.as_tensor(xhat)
    diff = ag.add(x, ag.scale(xhat, -1.0))
    return ag.mean_all(ag.elementwise_mul(diff, diff))


def bce(p, y, weight=None) -> Tensor:
    """Mean binary cross-entropy; ``weight`` scales the positive term."""
    p = ag.as_tensor(p)
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), p.shape)
    if np.any(p.data < 0) or np.any(p.data > 1):
        raise ValueError("probabilities must lie in (0, 1)")
    w = 1.0 if weight is None else weight
    pos = ag.elementwise_mul(ag.log(p), w * y)
    neg = ag.elementwise_mul(ag.log(1.0 - p), 1.0 - y)
    return ag.scale(ag.mean_all(ag.add(pos, neg)), -1.0)


# --- optimizers ------------------------------------------------------------------

class SGD:
    def __init__(self, params, lr: float, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay

    def step(self):
        for p in self.params:
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            p.data = p.data - self.lr * g


class Adam:
    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr, self.betas, self.eps, self.weight_decay = lr, betas, eps, weight_decay
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.betas
        for k, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1 ** self.t)
            vhat = self.v[k] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def make_optimizer(params, config: TrainConfig):
    cls = Adam if config.optimizer == "adam" else SGD
    return cls(params, lr=config.lr, weight_decay=config.weight_decay)


def optimizer_step(params: dict, grads: dict, state: dict, config: dict):
    """Functional update of a ``name -> array`` parameter map.

    ``config`` holds ``kind`` (``sgd``/``adam``) and ``lr`` plus optional Adam
    ``betas`` and ``eps``. Returns ``(new_params, new_state)``.
    """
    kind, lr = config.get("kind", "sgd"), config["lr"]
    new_params, new_state = {}, dict(state)
    if kind == "sgd":
        for k, p in params.items():
            new_params[k] = p - lr * grads[k]
        return new_params, new_state
    b1, b2 = config.get("betas", (0.9, 0.999))
    eps = config.get("eps", 1e-8)
    t = state.get("t", 0) + 1
    new_state["t"] = t
    for k, p in params.items():
        g = grads[k]
        m = b1 * state.get(("m", k), np.zeros_like(p)) + (1 - b1) * g
        v = b2 * state.get(("v", k), np.zeros_like(p)) + (1 - b2) * g * g
        new_state[("m", k)], new_state[("v", k)] = m, v
        new_params[k] = p - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return new_params, new_state


def _dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    if p <= 0:
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return ag.elementwise_mul(x, mask)


# --- models ----------------------------------------------------------------------

class RGNNClassifier:
    """Recurrent GNN with shared transition weights, mean readout and a linear output."""

    def __init__(self, vertex_dim: Optional[int], edge_dim: int, state_dim: int, n_classes: int,
                 seed: int):
        self.params = ModelParams(seed)
        self.featureless = vertex_dim is None
        init_rgnn_params(self.params, vertex_dim or CONSTANT_EMBED_SIZE, edge_dim, state_dim,
                         n_classes, "graph", constant_embedding=self.featureless)

    def forward(self, batch: Graph, graph_index, n_graphs: int, transitions: int) -> Tensor:
        h = rgnn_run(batch, self.params, transitions)
        return output_graph(h, batch, self.params, graph_index, n_graphs)


class SAGEClassifier:
    """Two GraphSAGE layers: ``in -> hidden`` (relu) and ``hidden -> classes``."""

    def __init__(self, in_dim: int, hidden: int, n_classes: int, aggregator: str, seed: int,
                 pool_dim: int = 64, dropout: float = 0.0):
        self.aggregator, self.dropout = aggregator, dropout
        p = self.params = ModelParams(seed)
        self.rng = np.random.default_rng(seed + 1)
        for k, (fi, fo) in enumerate([(in_dim, hidden), (hidden, n_classes)]):
            p.weight(f"l{k}_self", fi, fo)
            if aggregator == "pool":
                pd = pool_dim
                p.weight(f"l{k}_pool", fi, pd)
                p.bias(f"l{k}_pool_b", pd)
                p.weight(f"l{k}_neigh", pd, fo)
            else:
                p.weight(f"l{k}_neigh", fi, fo)
            p.bias(f"l{k}_b", fo)

    def forward(self, g: Graph, x, training: bool = False, mean_op=None) -> Tensor:
        p = self.params
        h = ag.as_tensor(x)
        for k, act in enumerate(("relu", None)):
            if training:
                h = _dropout(h, self.dropout, self.rng)
            if self.aggregator == "pool":
                h = sage_pool_layer(g, h, p[f"l{k}_pool"], p[f"l{k}_pool_b"], p[f"l{k}_self"],
                                    p[f"l{k}_neigh"], act, bias=p[f"l{k}_b"])
            else:
                h = sage_mean_layer(g, h, p[f"l{k}_self"], p[f"l{k}_neigh"], act,
                                    bias=p[f"l{k}_b"], mean_op=mean_op)
        return h


class GraphAutoencoder:
    def __init__(self, in_dim: int, hidden: int, latent: int, variational: bool, seed: int):
        self.variational = variational
        self.params = init_gae_params(ModelParams(seed), in_dim, hidden, latent, variational)

    def encode(self, g: Graph, x, a_norm: SparseMatrix, seed: Optional[int] = None,
               sample: bool = True) -> LatentEmbedding:
        if self.variational:
            return vgae_encode(g, x, self.params, seed=seed, a_norm=a_norm, sample=sample)
        return gae_encode(g, x, self.params, a_norm=a_norm)


# --- datasets --------------------------------------------------------------------

_DEFAULT_DATA_DIR = "data"

_CITATION = {
    "cora": ("cora.content", "cora.cites", 1433, 7),
    "citeseer": ("citeseer.content", "citeseer.cites", 3703, 6),
    "pubmed": ("pubmed.content", "pubmed.cites", 500, 3),
}


def data_dir(config: TrainConfig) -> Path:
    return Path(config.data_dir or os.environ.get("GNNKIT_DATA", _DEFAULT_DATA_DIR))


def load_citation(name: str, root, seed: int = 0) -> D.NodeDataset:
    content, cites, dim, n_classes = _CITATION[name]
    base = Path(root) / name
    split = base / "split.json"
    ds = D.load_cora(base / content, base / cites, dangling="skip" if name != "cora" else "error",
                     split_path=split if split.is_file() else None, seed=seed, name=name,
                     feature_dim=dim)
    if ds.n_classes != n_classes:
        raise D.DataError(f"{name}: found {ds.n_classes} classes, expected {n_classes}")
    return ds


def node_dataset(config: TrainConfig) -> D.NodeDataset:
    if config.dataset in _CITATION:
        return load_citation(config.dataset, data_dir(config), config.seed)
    if config.dataset == "two_clique":
        k = max(config.synth_size // 2, 4)
        g = D.synth_two_clique(k, 0.05, config.seed)
        labels = D.two_clique_labels(k)
        g = build_graph(g.n, g.edges, vertex_features=np.eye(g.n))
        n_train = max(2, g.n // 5)
        masks = D.random_node_split(labels, n_train, g.n // 5, g.n - n_train - g.n // 5, config.seed)
        return D.NodeDataset(g, labels, *masks, name="two_clique")
    g, labels = D.synth_planted_partition(config.synth_size * 10, 7, 500, config.seed)
    masks = D.random_node_split(labels, 140, 500, 1000, config.seed)
    return D.NodeDataset(g, labels, *masks, name="planted")


def link_graph(config: TrainConfig) -> Graph:
    if config.dataset in _CITATION:
        return load_citation(config.dataset, data_dir(config), config.seed).graph
    if config.dataset == "two_clique":
        g = D.synth_two_clique(max(config.synth_size // 2, 4), 0.05, config.seed)
        return build_graph(g.n, g.edges, vertex_features=np.eye(g.n))
    return D.synth_planted_partition(config.synth_size * 10, 7, 500, config.seed)[0]


def graph_dataset(config: TrainConfig) -> D.LabeledGraphSet:
    if config.dataset == "stargazers":
        base = data_dir(config) / "stargazers"
        return D.load_graph_set(base / "git_edges.json", base / "git_target.csv", "stargazers")
    if config.dataset == "structural":
        return D.synth_structural_classes(config.synth_size, config.seed)
    return two_clique_graph_set(config.synth_size, config.seed)


def two_clique_graph_set(count: int, seed: int) -> D.LabeledGraphSet:
    """Class 1: two cliques joined by sparse cross edges; class 0: the same blocks densely joined."""
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for k in range(count):
        label = k % 2
        p_cross = 0.1 if label else 0.9
        graphs.append(D.synth_two_clique(int(rng.integers(4, 9)), p_cross, int(rng.integers(1 << 31))))
        labels.append(label)
    return D.LabeledGraphSet(graphs, labels, "two_clique", [str(i) for i in range(count)])


# --- drivers ---------------------------------------------------------------------

def _finish(config: TrainConfig, losses, metrics, start, extras=None) -> EvalReport:
    for k, v in metrics.items():
        if isinstance(v, float) and not 0.0 <= v <= 1.0:
            raise TrainingError(f"metric {k}={v} outside [0, 1]")
    return EvalReport(config.task, [float(x) for x in losses], metrics, time.perf_counter() - start,
                      config.to_dict(), extras or {})


def train_graph_classifier(dataset: D.LabeledGraphSet, config: TrainConfig) -> EvalReport:
    """Recurrent GNN graph classification with a seeded train/test split."""
    start = time.perf_counter()
    if len(dataset) < 2:
        raise TrainingError("graph classification needs at least two graphs")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(dataset))
    n_test = max(1, int(round(len(dataset) * config.test_fraction)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    y = dataset.labels
    if len(np.unique(y[train_idx])) < 2:
        raise TrainingError("training split contains a single class")
    n_classes = max(dataset.n_classes, 2)
    g0 = dataset.graphs[0]
    vdim = g0.vertex_features.shape[1] if g0.vertex_features is not None else None
    model = RGNNClassifier(vdim, edge_feature_size(g0), config.hidden, n_classes, config.seed)
    opt = make_optimizer(model.params.tensors(), config)

    def batch_logits(idx):
        union, gi = disjoint_union([dataset.graphs[i] for i in idx])
        return model.forward(union, gi, len(idx), config.transitions)

    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(train_idx)
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            model.params.zero_grad()
            loss = cross_entropy(batch_logits(idx), y[idx])
            ag.backward(loss)
            opt.step()
            total += loss.item() * len(idx)
        losses.append(total / len(order))

    probs = []
    for lo in range(0, len(test_idx), 512):
        idx = test_idx[lo:lo + 512]
        probs.append(ag.softmax_rows(batch_logits(idx)).data)
    probs = np.concatenate(probs)
    y_test = y[test_idx]
    metrics = {"accuracy": multiclass_accuracy(y_test, probs.argmax(axis=1))}
    if n_classes == 2:
        try:
            metrics["auc"] = roc_auc(y_test, probs[:, 1])[1]
        except MetricError as e:
            raise TrainingError(f"test split cannot be scored: {e}") from None
    return _finish(config, losses, metrics, start,
                   {"n_train": int(len(train_idx)), "n_test": int(n_test)})


def train_node_classifier(ds: D.NodeDataset, config: TrainConfig) -> EvalReport:
    """Two-layer GraphSAGE vertex classifier trained on the train mask."""
    start = time.perf_counter()
    g = ds.graph
    if g.vertex_features is None:
        raise TrainingError("vertex classification needs vertex features")
    if not ds.train_mask.any() or not ds.test_mask.any():
        raise TrainingError("train and test masks must be nonempty")
    if len(np.unique(ds.labels[ds.train_mask])) < 2:
        raise TrainingError("training vertices contain a single class")
    n_classes = ds.n_classes
    model = SAGEClassifier(g.vertex_features.shape[1], config.hidden, n_classes, config.aggregator,
                           config.seed, config.pool_dim, config.dropout)
    opt = make_optimizer(model.params.tensors(), config)
    x = Tensor(g.vertex_features)
    mean_op = neighbor_mean_operator(g)
    train_idx = np.nonzero(ds.train_mask)[0]
    losses = []
    for _ in range(config.epochs):
        model.params.zero_grad()
        logits = model.forward(g, x, training=True, mean_op=mean_op)
        loss = cross_entropy(ag.gather_rows(logits, train_idx), ds.labels[train_idx])
        ag.backward(loss)
        opt.step()
        losses.append(loss.item())
    logits = model.forward(g, x, mean_op=mean_op)
    pred = logits.data.argmax(axis=1)
    metrics = {"accuracy": multiclass_accuracy(ds.labels[ds.test_mask], pred[ds.test_mask])}
    if n_classes == 2 and len(np.unique(ds.labels[ds.test_mask])) == 2:
        probs = ag.softmax_rows(logits).data[:, 1]
        metrics["auc"] = roc_auc(ds.labels[ds.test_mask], probs[ds.test_mask])[1]
    if ds.val_mask.any():
        metrics["val_accuracy"] = multiclass_accuracy(ds.labels[ds.val_mask], pred[ds.val_mask])
    return _finish(config, losses, metrics, start)


def _link_scores(z: np.ndarray, pos, neg):
    labels = np.r_[np.ones(len(pos)), np.zeros(len(neg))]
    scores = np.r_[score_pairs(z, pos), score_pairs(z, neg)]
    return {"auc": roc_auc(labels, scores)[1], "ap": average_precision(labels, scores)}


def train_link_predictor(g: Graph, config: TrainConfig, split: Optional[D.EdgeSplit] = None) -> EvalReport:
    """GAE / VGAE link prediction on a seeded 85/5/10 edge split.

    The encoder sees only training edges; the decoder reconstructs the
    training adjacency with self-loops. Held-out positives are scored against
    an equal number of sampled non-edges.
    """
    start = time.perf_counter()
    split = split or D.split_edges(g, (0.85, 0.05, 0.10), seed=config.seed)
    D.check_split(g, split)
    train = split.train
    x = g.vertex_features if g.vertex_features is not None else np.eye(g.n)
    a_norm = gcn_norm_adjacency(train)
    target = adjacency_sparse(build_graph(g.n, np.r_[train.edges, np.repeat(np.arange(g.n), 2).reshape(-1, 2)]),
                              weighted=False)
    model = GraphAutoencoder(x.shape[1], config.hidden, config.latent, config.model == "vgae", config.seed)
    opt = make_optimizer(model.params.tensors(), config)
    xt = Tensor(x)
    # default 1/N puts the KL term on the per-entry scale of the reconstruction loss
    kl_weight = 1.0 / g.n if config.kl_weight is None else config.kl_weight
    noise_rng = np.random.default_rng(config.seed + 7919)
    losses = []
    for _ in range(config.epochs):
        model.params.zero_grad()
        emb = model.encode(train, xt, a_norm, seed=int(noise_rng.integers(1 << 31)))
        loss = decoder_bce_loss(emb.z, target)
        if model.variational:
            loss = ag.add(loss, ag.scale(kl_divergence(emb.mu, emb.logvar), kl_weight))
        ag.backward(loss)
        opt.step()
        losses.append(loss.item())
    z = model.encode(train, xt, a_norm, sample=False).z.data
    metrics = _link_scores(z, split.test_pos, split.test_neg)
    if len(split.val_pos):
        val = _link_scores(z, split.val_pos, split.val_neg)
        metrics.update({"val_auc": val["auc"], "val_ap": val["ap"]})
    report = _finish(config, losses, metrics, start,
                     {"n_train_edges": int(train.m), "n_test_edges": int(len(split.test_pos))})
    report.extras["embedding"] = z
    return report


def run(config: TrainConfig) -> EvalReport:
    if config.task == "graph":
        return train_graph_classifier(graph_dataset(config), config)
    if config.task == "node":
        return train_node_classifier(node_dataset(config), config)
    return train_link_predictor(link_graph(config), config)


def summarize(reports: list) -> dict:
    """Mean and (population) standard deviation of every metric across runs."""
    keys = sorted(set().union(*(r.metrics for r in reports)))
    out = {}
    for k in keys:
        vals = np.array([r.metrics[k] for r in reports if k in r.metrics], dtype=np.float64)
        out[k] = {"mean": float(vals.mean()), "std": float(vals.std()), "n": int(len(vals))}
    return out
