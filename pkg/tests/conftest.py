import numpy as np
import pytest

from mginf.dist import CATALOG
from mginf.transient import QueueParams


@pytest.fixture(params=sorted(CATALOG), ids=sorted(CATALOG))
def model(request):
    return CATALOG[request.param]


@pytest.fixture
def mm_inf():
    """lambda = 1 with unit exponential service."""
    from mginf.dist import Exponential
    return QueueParams(1.0, Exponential(1.0))


@pytest.fixture
def lomax3():
    from mginf.dist import Lomax
    return QueueParams(1.0, Lomax(3.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
