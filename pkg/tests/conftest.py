import sys

import pytest

from hexmesh.graph import build_graph
from hexmesh.topology import generate_hex_mesh, mesh72


@pytest.fixture(scope="session")
def topo72():
    return mesh72()


@pytest.fixture(scope="session")
def graph72(topo72):
    return build_graph(topo72)


@pytest.fixture(scope="session")
def hexagon():
    return generate_hex_mesh(1, 1)


@pytest.fixture(scope="session")
def two_cells():
    return generate_hex_mesh(2, 1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
