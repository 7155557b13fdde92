import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dyadlab.grid import DyadicGrid, GridSpec, random_grid

settings.register_profile("dyadlab", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dyadlab")


@pytest.fixture
def grid2():
    return DyadicGrid(GridSpec.standard(3, 2))


@pytest.fixture
def shifted2():
    return DyadicGrid(random_grid(7, 3, 2))


@pytest.fixture
def grid1():
    return DyadicGrid(GridSpec.standard(4, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(n: int, ok: bool, detail: str = ""):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
