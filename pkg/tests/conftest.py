import itertools

import numpy as np
import pytest

from krongraph.core import InitiatorMatrix, KroneckerPowerSpec
from krongraph.graph import SparseGraph

THETA_STAR = np.array([[0.8, 0.6], [0.5, 0.3]])


def naive_kron(a, b):
    """Kronecker product straight from the definition, 0-based."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros((a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]))
    for i, j, p, q in itertools.product(range(a.shape[0]), range(a.shape[1]),
                                        range(b.shape[0]), range(b.shape[1])):
        out[i * b.shape[0] + p, j * b.shape[1] + q] = a[i, j] * b[p, q]
    return out


def naive_power(a, k):
    out = np.asarray(a, dtype=float)
    for _ in range(k - 1):
        out = naive_kron(out, a)
    return out


def graph_from_dense(m):
    u, v = np.nonzero(np.asarray(m))
    return SparseGraph(m.shape[0], u, v)


def random_graph(n, p, rng):
    m = rng.random((n, n)) < p
    return graph_from_dense(m)


def spec(theta, k):
    return KroneckerPowerSpec(InitiatorMatrix(theta), k)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
