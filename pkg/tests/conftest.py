import numpy as np
import pytest

from dbarsolve import PlanarDomain, ProductDomain
from dbarsolve.planar_kernels import KernelContext
from dbarsolve.product_operator import Resolution


@pytest.fixture(scope="session")
def disc():
    return PlanarDomain.unit_disc()


@pytest.fixture(scope="session")
def ellipse():
    return PlanarDomain.ellipse(1.0, 0.2)


@pytest.fixture(scope="session")
def bidisc():
    return ProductDomain.polydisc(2)


@pytest.fixture(scope="session")
def disc_ctx(disc):
    return KernelContext(disc)


@pytest.fixture(scope="session")
def ellipse_ctx(ellipse):
    return KernelContext(ellipse, 256)


@pytest.fixture(scope="session")
def light_res():
    """Cheap product resolution for unit tests (acceptance uses the default)."""
    return Resolution({1: 64, 2: 24, 3: 8}, {1: 32, 2: 12, 3: 6})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
