import numpy as np
import pytest

from crowdbp import ReliabilitySpec, degree_regular_assignment, make_population


@pytest.fixture
def small_graph():
    return degree_regular_assignment(12, 8, 4, 6, seed=3)


@pytest.fixture
def small_population(small_graph):
    return make_population(small_graph.n_users, small_graph.n_questions,
                           ReliabilitySpec(0.7, 0.02), seed=5, truth="random")


def brute_girth(pairs):
    """Oracle: shortest cycle via networkx's minimum cycle basis."""
    import networkx as nx

    g = nx.Graph()
    g.add_edges_from((("u", u), ("q", q)) for u, q in pairs)
    basis = nx.minimum_cycle_basis(g)
    return min((len(c) for c in basis), default=np.inf)


ACCEPTANCE = {}


def record(criterion, passed, detail):
    """Remember one acceptance line; it is also printed for ``pytest -s``."""
    line = f"{criterion} {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
