import sys

import pytest

from z2higgs.lattice import LatticeGraph, build_chain, build_flake, build_ladder


@pytest.fixture(scope="session")
def flake0():
    return build_flake(0)


@pytest.fixture(scope="session")
def ladder():
    return build_ladder()


@pytest.fixture(scope="session")
def chain4():
    return build_chain(4)


@pytest.fixture(scope="session")
def square_tail():
    """Ten-qubit bipartite test lattice: a square with one pendant site."""
    coords = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0))
    return LatticeGraph(coords, ((0, 1), (0, 2), (1, 3), (2, 3), (3, 4)), "custom", {})


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
