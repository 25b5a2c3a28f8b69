import numpy as np
import pytest

from qpass.primitives import ProtocolParams
from qpass.qcore import RngStream

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def half():
    """alpha = xi = 1/2."""
    return ProtocolParams.from_xi(0.5, 0.5)


@pytest.fixture
def rng():
    return RngStream(12345, 0)


@pytest.fixture
def param_grid():
    g = np.linspace(0.1, 0.9, 9)
    return [ProtocolParams.from_xi(a, x) for a in g for x in g]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
