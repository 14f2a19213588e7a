"""Small built-in graphs used by the CLI demo and the tests."""

from __future__ import annotations

import numpy as np

from .graph import Graph, build_graph

WORKED_EXAMPLE_EDGES = ((0, 1), (0, 2), (0, 3), (2, 3), (3, 4))
WORKED_EXAMPLE_SIGNALS = np.array([[0.2, 8.0],
                                   [0.4, 6.0],
                                   [0.3, 7.0],
                                   [0.3, 12.0],
                                   [0.1, 4.0]])


def worked_example() -> Graph:
    """Five vertices, five edges; vertex features hold two graph signals."""
    return build_graph(5, WORKED_EXAMPLE_EDGES, vertex_features=WORKED_EXAMPLE_SIGNALS)


MOLECULE_EDGES = ((0, 1), (1, 2), (1, 3), (1, 4), (3, 5), (3, 6), (3, 7))


def molecule_example() -> Graph:
    """Eight-atom molecule: two heavy atoms (1 and 3) carrying the other six."""
    return build_graph(8, MOLECULE_EDGES)
