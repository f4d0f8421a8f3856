import math

import networkx as nx
import pytest
from hypothesis import settings

from subquad.graph import Graph

# statistical property tests must not flake between runs
settings.register_profile("repo", derandomize=True)
settings.load_profile("repo")


def atlas_graphs(max_nodes=7):
    """All connected graphs on 1..max_nodes vertices from the networkx atlas."""
    out = []
    for h in nx.graph_atlas_g():
        if 0 < h.number_of_nodes() <= max_nodes and nx.is_connected(h):
            out.append(Graph(h.number_of_nodes(), list(h.edges())))
    return out


@pytest.fixture(scope="session")
def atlas7():
    return atlas_graphs(7)


def binom_sigma(p, n):
    return math.sqrt(max(p * (1 - p), 1e-300) / n)


ACCEPTANCE_LINES = []


def acceptance_line(number, passed, detail):
    """Print one acceptance verdict and keep it for the end-of-run summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
