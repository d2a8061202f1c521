import numpy as np
import pytest

from edrsky import fixture_path, hdr_io
from edrsky.envmap import SkyangularGeometry

ACCEPTANCE = []


def record(number, title, ok, detail=""):
    """Register one acceptance line; printed at the end of the session."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sunny():
    return hdr_io.read_hdr(fixture_path("sunny.hdr")).astype(np.float64)


@pytest.fixture(scope="session")
def cloudy():
    return hdr_io.read_hdr(fixture_path("cloudy.hdr")).astype(np.float64)


@pytest.fixture(scope="session")
def geom256():
    return SkyangularGeometry(256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
