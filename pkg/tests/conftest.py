import sys

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from gnnkit.graph import build_graph

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_graph(rng, n, p=0.3, connected=False, **kw):
    """Erdos-Renyi graph; with ``connected`` a random spanning path is added first."""
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if connected and n > 1:
        order = rng.permutation(n)
        edges += list(zip(order[:-1].tolist(), order[1:].tolist()))
    return build_graph(n, edges, **kw)


@st.composite
def graphs(draw, min_n=1, max_n=12, connected=False):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**31 - 1))
    p = draw(st.floats(0.0, 0.8))
    return random_graph(np.random.default_rng(seed), n, p, connected)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[k])
