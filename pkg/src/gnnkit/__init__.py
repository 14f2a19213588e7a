"""gnnkit: graph neural networks on numpy, from graph primitives to trained models."""

from .graph import (Graph, GraphError, SparseMatrix, adjacency, build_graph, degree,
                    disjoint_union, laplacian, neighbors, permute)
from .autograd import Tensor, backward, finite_diff_check
from .spectral import (Eigensystem, cheb_filter, eigensystem, gft, graph_eigensystem, igft,
                       spectral_convolve)
from .metrics import UNDEFINED, average_precision, confusion, roc_auc
from .training import EvalReport, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "Graph", "GraphError", "SparseMatrix", "adjacency", "build_graph", "degree", "disjoint_union",
    "laplacian", "neighbors", "permute", "Tensor", "backward", "finite_diff_check", "Eigensystem",
    "cheb_filter", "eigensystem", "gft", "graph_eigensystem", "igft", "spectral_convolve",
    "UNDEFINED", "average_precision", "confusion", "roc_auc", "EvalReport", "TrainConfig",
]
