import numpy as np
import pytest

from cvxeuler.geometry import default_direction_system
from cvxeuler.spectral import Grid3, TimeGrid, dealias, from_physical


def random_field(grid, time_grid, rank, rng, **flags):
    """Random real field truncated to the retained band."""
    shape = (time_grid.samples,) + (3,) * rank + grid.shape
    return dealias(from_physical(rng.standard_normal(shape), grid, time_grid, **flags))


@pytest.fixture(scope="session")
def system():
    return default_direction_system()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid16():
    return Grid3(16)


@pytest.fixture
def tg2():
    return TimeGrid(2)


_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_c"):
        return
    number = int(name[6:].split("_", 1)[0])
    if report.when == "call" or report.failed or report.skipped:
        if number not in _CRITERIA or _CRITERIA[number][0] == "PASS":
            _CRITERIA[number] = ("PASS" if report.passed else "FAIL", name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, name = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  ({name})")
