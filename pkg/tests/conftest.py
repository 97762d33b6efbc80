import numpy as np
import pytest

from polyhom.graph import GraphParams, generate_graph


@pytest.fixture(scope="session")
def jittered_graph():
    return generate_graph(GraphParams(seed=1), [[0.0, 0.0], [28.0, 28.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
