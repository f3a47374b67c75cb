import numpy as np
import pytest

from cpmdp import kernels
from cpmdp.gridworld import GridSpec


@pytest.fixture
def chain():
    """Two-cell deterministic corridor, right cell terminal (+100)."""
    return GridSpec([2], terminals={1: 100.0}, noise=1.0)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    prev = kernels.get_backend()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(prev)


def random_values(rng, n):
    return rng.normal(scale=50.0, size=n)


_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _criteria.append((marker.args[0], call.excinfo is None))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in _criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
