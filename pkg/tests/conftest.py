import pytest

from swipt_rectifier import CircuitParams
from swipt_rectifier.modem import build_constellation

TS_SHORT, TS_MID, TS_LONG = 6.25e-6, 12.5e-6, 18.75e-6


@pytest.fixture(scope="session")
def circuit():
    return CircuitParams()


@pytest.fixture(scope="session")
def open_load():
    return CircuitParams(load_resistance="open")


@pytest.fixture(scope="session")
def bask():
    return build_constellation(2, 0.5, 5 / 16)


@pytest.fixture(scope="session")
def qask():
    return build_constellation(4, 0.5, 5 / 16)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
