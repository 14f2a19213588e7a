"""Dataset loaders, edge/vertex splits and synthetic graph generators.

Nothing here downloads data; see ``scripts/fetch_datasets.py`` for that.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graph import Graph, GraphError, build_graph

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass
class LabeledGraphSet:
    graphs: list
    labels: np.ndarray
    name: str = ""
    ids: Optional[list] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.graphs) != len(self.labels):
            raise DataError(f"{len(self.graphs)} graphs but {len(self.labels)} labels")
        if len(self.labels) and self.labels.min() < 0:
            raise DataError("labels must be nonnegative")

    def __len__(self):
        return len(self.graphs)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def subset(self, idx) -> "LabeledGraphSet":
        idx = np.asarray(idx, dtype=np.int64)
        ids = [self.ids[i] for i in idx] if self.ids is not None else None
        return LabeledGraphSet([self.graphs[i] for i in idx], self.labels[idx], self.name, ids)


@dataclass
class NodeDataset:
    graph: Graph
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    name: str = ""
    class_names: list = field(default_factory=list)
    paper_ids: list = field(default_factory=list)
    raw_citations: int = 0

    def __post_init__(self):
        n = self.graph.n
        self.labels = np.asarray(self.labels, dtype=np.int64)
        masks = [np.asarray(m, dtype=bool) for m in (self.train_mask, self.val_mask, self.test_mask)]
        self.train_mask, self.val_mask, self.test_mask = masks
        if len(self.labels) != n or any(len(m) != n for m in masks):
            raise DataError("labels and masks must have one entry per vertex")
        if np.any(masks[0] & masks[1]) or np.any(masks[0] & masks[2]) or np.any(masks[1] & masks[2]):
            raise DataError("train/val/test masks overlap")
        if np.any(self.labels[self.test_mask] < 0):
            raise DataError("every test vertex needs a label")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


# --- splits ------------------------------------------------------------------

def random_node_split(labels, n_train: int = 140, n_val: int = 500, n_test: int = 1000,
                      seed: int = 0, stratified: bool = True):
    """Seeded disjoint train/val/test masks.

    With ``stratified`` the training set takes ``n_train // C`` vertices per
    class (remaining slots filled at random), the rest are drawn uniformly.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n_train + n_val + n_test > n:
        raise DataError(f"split {n_train}/{n_val}/{n_test} needs more than {n} vertices")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train = []
    if stratified:
        classes = np.unique(labels)
        per = n_train // len(classes)
        for c in classes:
            train.extend(perm[labels[perm] == c][:per].tolist())
    taken = set(train)
    rest = [i for i in perm if i not in taken]
    extra = n_train - len(train)
    train.extend(rest[:extra])
    rest = rest[extra:]
    masks = []
    for idx in (train, rest[:n_val], rest[n_val:n_val + n_test]):
        m = np.zeros(n, dtype=bool)
        m[np.asarray(idx, dtype=np.int64)] = True
        masks.append(m)
    return tuple(masks)


@dataclass
class EdgeSplit:
    train: Graph
    train_pos: np.ndarray
    val_pos: np.ndarray
    val_neg: np.ndarray
    test_pos: np.ndarray
    test_neg: np.ndarray


def _pair_keys(pairs, n):
    pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
    return pairs[:, 0] * n + pairs[:, 1]


def sample_non_edges(g: Graph, count: int, rng: np.random.Generator, exclude=None) -> np.ndarray:
    """Draw ``count`` distinct vertex pairs ``(i < j)`` that are not edges of ``g``."""
    n = g.n
    forbidden = set(_pair_keys(g.edges, n).tolist())
    if exclude is not None and len(exclude):
        forbidden |= set(_pair_keys(exclude, n).tolist())
    available = n * (n - 1) // 2 - sum(1 for k in forbidden if k // n != k % n)
    if count > available:
        raise DataError(f"cannot draw {count} non-edges; only {available} exist")
    out, seen = [], set()
    while len(out) < count:
        need = count - len(out)
        i = rng.integers(0, n, size=2 * need + 16)
        j = rng.integers(0, n, size=2 * need + 16)
        for a, b in zip(np.minimum(i, j).tolist(), np.maximum(i, j).tolist()):
            k = a * n + b
            if a == b or k in forbidden or k in seen:
                continue
            seen.add(k)
            out.append((a, b))
            if len(out) == count:
                break
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def split_edges(g: Graph, fractions: Sequence[float] = (0.85, 0.05, 0.10), seed: int = 0) -> EdgeSplit:
    """Partition the edges of an undirected graph into train/val/test positives.

    Validation and test sets get an equal number of negatives drawn from
    pairs that are not edges anywhere in ``g``. The training graph keeps all
    vertices and features but only the training positives.
    """
    if g.directed:
        raise DataError("edge splits need an undirected graph")
    f_train, f_val, f_test = (float(f) for f in fractions)
    if min(fractions) < 0 or f_train + f_val + f_test > 1 + 1e-12:
        raise DataError(f"fractions {tuple(fractions)} must be nonnegative and sum to at most 1")
    edges = g.edges[g.edges[:, 0] != g.edges[:, 1]]
    m = len(edges)
    n_test = int(round(m * f_test))
    n_val = int(round(m * f_val))
    n_train = min(int(round(m * f_train)), m - n_test - n_val)
    if abs(f_train + f_val + f_test - 1) < 1e-9:
        n_train = m - n_test - n_val
    if (f_train > 0 and n_train <= 0) or (f_test > 0 and n_test == 0) or (f_val > 0 and n_val == 0):
        raise DataError(f"graph with {m} edges is too small for split {tuple(fractions)}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    test_pos = edges[perm[:n_test]]
    val_pos = edges[perm[n_test:n_test + n_val]]
    train_pos = edges[np.sort(perm[n_test + n_val:n_test + n_val + n_train])]
    negs = sample_non_edges(g, n_val + n_test, rng)
    train = build_graph(g.n, train_pos, vertex_features=g.vertex_features)
    split = EdgeSplit(train, train_pos, val_pos, negs[:n_val], test_pos, negs[n_val:])
    check_split(g, split)
    return split


def check_split(g: Graph, split: EdgeSplit) -> None:
    """Assert that held-out positives never appear in training and negatives are non-edges."""
    n = g.n
    train = set(_pair_keys(split.train.edges, n).tolist())
    for name in ("val_pos", "test_pos"):
        leak = train & set(_pair_keys(getattr(split, name), n).tolist())
        if leak:
            raise AssertionError(f"{len(leak)} {name} edges also appear in the training graph")
    edges = set(_pair_keys(g.edges, n).tolist())
    for name in ("val_neg", "test_neg"):
        bad = edges & set(_pair_keys(getattr(split, name), n).tolist())
        if bad:
            raise AssertionError(f"{len(bad)} {name} pairs are actual edges")


# --- file formats --------------------------------------------------------------

def _open_text(path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    return path.read_text().splitlines()


def load_cora(content_path, cites_path, *, dangling: str = "error", split_path=None,
              seed: int = 0, name: str = "cora", n_train: int = 140, n_val: int = 500,
              n_test: int = 1000, feature_dim: Optional[int] = None) -> NodeDataset:
    """Load a Cora-style citation dataset.

    ``content`` lines are ``<id> <features...> <label>`` (tab or space
    separated); ``cites`` lines are ``<cited> <citing>``. Citations become
    undirected edges, so duplicates and reciprocal pairs collapse; the raw
    line count is kept as ``raw_citations``. ``dangling`` controls citations
    naming unknown ids: ``"error"`` or ``"skip"``.
    """
    if dangling not in ("error", "skip"):
        raise ValueError("dangling must be 'error' or 'skip'")
    ids, feats, raw_labels = [], [], []
    index = {}
    for lineno, line in enumerate(_open_text(content_path), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 3:
            raise DataError(f"{content_path}:{lineno}: expected id, features and label")
        if parts[0] in index:
            raise DataError(f"{content_path}:{lineno}: duplicate paper id {parts[0]!r}")
        try:
            row = [float(v) for v in parts[1:-1]]
        except ValueError:
            raise DataError(f"{content_path}:{lineno}: non-numeric feature value") from None
        if feats and len(row) != len(feats[0]):
            raise DataError(f"{content_path}:{lineno}: {len(row)} features, expected {len(feats[0])}")
        index[parts[0]] = len(ids)
        ids.append(parts[0])
        feats.append(row)
        raw_labels.append(parts[-1])
    if not ids:
        raise DataError(f"{content_path}: no vertices")
    x = np.array(feats)
    if feature_dim is not None and x.shape[1] != feature_dim:
        raise DataError(f"{content_path}: {x.shape[1]} features, expected {feature_dim}")
    class_names = sorted(set(raw_labels))
    labels = np.array([class_names.index(c) for c in raw_labels])

    edges, raw, skipped = [], 0, 0
    for lineno, line in enumerate(_open_text(cites_path), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{cites_path}:{lineno}: expected two paper ids")
        raw += 1
        missing = [p for p in parts if p not in index]
        if missing:
            if dangling == "error":
                raise DataError(f"{cites_path}:{lineno}: unknown paper id {missing[0]!r}")
            skipped += 1
            continue
        edges.append((index[parts[1]], index[parts[0]]))
    if skipped:
        log.info("%s: skipped %d citations naming unknown ids", name, skipped)
    g = build_graph(len(ids), edges, vertex_features=x)

    if split_path is not None:
        chosen = json.loads(Path(split_path).read_text())
        masks = []
        for key in ("train", "val", "test"):
            m = np.zeros(g.n, dtype=bool)
            try:
                m[[index[str(p)] for p in chosen[key]]] = True
            except KeyError as e:
                raise DataError(f"{split_path}: unknown id or missing key {e}") from None
            masks.append(m)
    else:
        if g.n <= n_train + n_val:
            raise DataError(f"{name}: {g.n} vertices leave no test set after {n_train} train "
                            f"and {n_val} validation vertices")
        masks = random_node_split(labels, n_train, n_val, min(n_test, g.n - n_train - n_val), seed)
    ds = NodeDataset(g, labels, *masks, name=name, class_names=class_names, paper_ids=ids,
                     raw_citations=raw)
    log.info("%s: N=%d, undirected M=%d (raw citation lines %d)", name, g.n, g.m, raw)
    return ds


def load_graph_set(edges_json_path, labels_csv_path, name: str = "graph_set") -> LabeledGraphSet:
    """Load ``{"<graph_id>": [[u, v], ...]}`` plus a ``graph_id,label`` CSV.

    Vertex ids are assumed to be ``0..n-1`` per graph; ``n`` is one more than
    the largest id that appears.
    """
    path = Path(edges_json_path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    raw = json.loads(path.read_text())
    if not isinstance(raw, dict):
        raise DataError(f"{path}: expected a JSON object mapping graph ids to edge lists")
    labels = {}
    for lineno, line in enumerate(_open_text(labels_csv_path), 1):
        if not line.strip():
            continue
        row = next(csv.reader([line]))
        if len(row) < 2:
            raise DataError(f"{labels_csv_path}:{lineno}: expected graph_id,label")
        if lineno == 1 and not row[1].strip().lstrip("-").isdigit():
            continue
        labels[row[0].strip()] = int(row[1])
    missing = [k for k in raw if k not in labels]
    if missing:
        raise DataError(f"{labels_csv_path}: no label for graph id {missing[0]!r}")
    extra = [k for k in labels if k not in raw]
    if extra:
        raise DataError(f"{edges_json_path}: no edges for labelled graph id {extra[0]!r}")
    ids = sorted(raw, key=lambda k: (len(k), k))
    graphs = []
    for k in ids:
        e = np.asarray(raw[k], dtype=np.int64).reshape(-1, 2)
        n = int(e.max()) + 1 if len(e) else 1
        try:
            graphs.append(build_graph(n, e))
        except GraphError as err:
            raise DataError(f"graph {k!r}: {err}") from None
    return LabeledGraphSet(graphs, [labels[k] for k in ids], name, ids)


def write_graph_set(gs: LabeledGraphSet, edges_json_path, labels_csv_path) -> None:
    ids = gs.ids if gs.ids is not None else [str(i) for i in range(len(gs))]
    Path(edges_json_path).write_text(json.dumps({k: g.edges.tolist() for k, g in zip(ids, gs.graphs)}))
    with Path(labels_csv_path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph_id", "label"])
        w.writerows(zip(ids, gs.labels.tolist()))


def write_edge_list(g: Graph, path) -> Path:
    """Native export: ``# n=<N>`` header, then ``u v [weight]`` per edge."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# n={g.n}\n")
        w = g.weights
        for k, (u, v) in enumerate(g.edges.tolist()):
            fh.write(f"{u} {v} {float(w[k])!r}\n" if w is not None else f"{u} {v}\n")
    return path


def read_edge_list(path) -> Graph:
    n, edges, weights = None, [], []
    for lineno, line in enumerate(_open_text(path), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("n="):
                n = int(line[1:].strip()[2:])
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 'u v [weight]'")
        edges.append((int(parts[0]), int(parts[1])))
        if len(parts) == 3:
            weights.append(float(parts[2]))
    if n is None:
        raise DataError(f"{path}: missing '# n=<N>' header")
    if weights and len(weights) != len(edges):
        raise DataError(f"{path}: weights given for some edges but not all")
    return build_graph(n, edges, weights=weights or None)


# --- synthetic data ------------------------------------------------------------

def synth_two_clique(n_per_block: int, p_cross: float, seed: int = 0) -> Graph:
    """Two complete blocks of ``n_per_block`` vertices plus Bernoulli cross edges."""
    if n_per_block < 2:
        raise DataError("blocks need at least two vertices")
    rng = np.random.default_rng(seed)
    k = n_per_block
    edges = [(i, j) for b in (0, k) for i in range(b, b + k) for j in range(i + 1, b + k)]
    cross = rng.random((k, k)) < p_cross
    edges += [(i, k + j) for i, j in zip(*np.nonzero(cross))]
    return build_graph(2 * k, edges)


def two_clique_labels(n_per_block: int) -> np.ndarray:
    return np.repeat([0, 1], n_per_block)


def random_tree(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random labelled tree via a Pruefer sequence."""
    if n == 1:
        return np.zeros((0, 2), dtype=np.int64)
    if n == 2:
        return np.array([[0, 1]])
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=np.int64)
    np.add.at(degree, seq, 1)
    edges = []
    for v in seq:
        leaf = int(np.nonzero(degree == 1)[0][0])
        edges.append((leaf, int(v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = np.nonzero(degree == 1)[0]
    edges.append((int(u), int(w)))
    return np.array(edges, dtype=np.int64)


def random_cyclic_graph(n: int, m: int, rng: np.random.Generator, min_cycles: int = 2) -> np.ndarray:
    """Uniform random simple graph with ``n`` vertices and ``m`` edges, resampled
    until its cycle rank (``m - n + components``) is at least ``min_cycles``."""
    from .graph import connected_components

    pairs = np.array([(i, j) for i in range(n) for j in range(i + 1, n)])
    for _ in range(1000):
        e = pairs[rng.choice(len(pairs), size=m, replace=False)]
        comps = connected_components(build_graph(n, e)).max() + 1
        if m - n + comps >= min_cycles:
            return e
    raise DataError(f"could not draw a graph with {min_cycles} cycles from n={n}, m={m}")


def synth_structural_classes(count: int, seed: int = 0, n_range=(12, 30)) -> LabeledGraphSet:
    """Balanced featureless graph classification set.

    Class 0 graphs are uniform random trees; class 1 graphs are random graphs
    with the same vertex and edge counts (so the same mean degree) that
    contain cycles. Only structure separates the classes.
    """
    if count < 2:
        raise DataError("need at least two graphs")
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for k in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        label = k % 2
        e = random_tree(n, rng) if label == 0 else random_cyclic_graph(n, n - 1, rng)
        graphs.append(build_graph(n, e))
        labels.append(label)
    order = rng.permutation(count)
    return LabeledGraphSet([graphs[i] for i in order], np.array(labels)[order], "structural_classes",
                           [str(i) for i in range(count)])


def synth_planted_partition(n: int, n_classes: int, feature_dim: int, seed: int = 0,
                            avg_degree: float = 4.0, homophily: float = 0.8,
                            feature_density: float = 0.02, signal: float = 3.0):
    """Citation-like stand-in: a planted partition graph with sparse binary features.

    Edges stay inside a class with probability ``homophily``. Each class has
    a set of preferred feature words that are ``signal`` times more likely.
    Returns ``(graph, labels)``.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n)
    m = int(n * avg_degree / 2)
    src = rng.integers(0, n, size=3 * m)
    same = rng.random(3 * m) < homophily
    by_class = [np.nonzero(labels == c)[0] for c in range(n_classes)]
    dst = np.empty_like(src)
    for k, (s, sm) in enumerate(zip(src, same)):
        pool = by_class[labels[s]] if sm else np.arange(n)
        dst[k] = pool[rng.integers(0, len(pool))]
    e = np.stack([src, dst], 1)
    e = e[e[:, 0] != e[:, 1]][:m]
    words = rng.integers(0, n_classes, size=feature_dim)
    p = np.full((n, feature_dim), feature_density)
    p[labels[:, None] == words[None, :]] *= signal
    x = (rng.random((n, feature_dim)) < p).astype(np.float64)
    return build_graph(n, e, vertex_features=x), labels
