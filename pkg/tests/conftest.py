import numpy as np
import pytest

from tiltcond.catalog import biquadratic, planar_pair, planar_triangle, quartic_pair, scalar_square

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def quartic():
    return quartic_pair()


@pytest.fixture(scope="session")
def biq():
    return biquadratic()


@pytest.fixture(scope="session")
def square():
    return scalar_square()


@pytest.fixture(scope="session")
def catalog_functions():
    return {
        "quartic-pair": quartic_pair(),
        "biquadratic": biquadratic(),
        "scalar": scalar_square(),
        "planar-pair": planar_pair(),
        "planar-triangle": planar_triangle(),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
