import functools

import numpy as np
import pytest

from giverscheme import inversion


@functools.lru_cache(maxsize=None)
def steady_distribution(f):
    """Inverted steady state on the default grid, shared across tests."""
    return inversion.invert_distribution(inversion.GiverTransform(f))


@pytest.fixture
def steady():
    return steady_distribution


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
