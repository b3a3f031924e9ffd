import numpy as np
import pytest

from roster_lab import _pykernels, kernels
from roster_lab.network import Edge, TrafficNetwork


@pytest.fixture
def pigou_net():
    return TrafficNetwork.build([Edge(1, 1, 2, 16 / 65, 4000.0), Edge(2, 1, 2, 0.2, 2000.0)])


@pytest.fixture
def diamond_net():
    # two disjoint 1->4 paths plus a cross edge
    return TrafficNetwork.build([
        Edge(1, 1, 2, 0.1, 1000.0),
        Edge(2, 2, 4, 0.1, 1000.0),
        Edge(3, 1, 3, 0.2, 1000.0),
        Edge(4, 3, 4, 0.2, 1000.0),
        Edge(5, 2, 3, 0.05, 500.0),
    ])


@pytest.fixture
def pure_python(monkeypatch):
    """Route every kernel call through the pure-Python fallback."""
    for name in ("bpr", "route_table", "sample_block", "sampled_summary"):
        monkeypatch.setattr(kernels, name, getattr(_pykernels, name))
    return _pykernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; the lines are echoed in the terminal summary."""
    def emit(number: int, ok: bool, detail: str):
        _ACCEPTANCE_LINES.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
