import math

import pytest

from gravdce.geometry import CavityConfig, MetricParams, MirrorMotion, ModeIndex, Sine

FUNDAMENTAL = ModeIndex(1, 1, 1)
RESONANT_VARPI = 2 * math.sqrt(3) * math.pi  # 2 w_(1,1,1) in flat space, a0 = 1


@pytest.fixture
def unit_cavity():
    return CavityConfig(a0=1.0)


@pytest.fixture
def flat():
    return MetricParams()


@pytest.fixture
def resonant_motion():
    return MirrorMotion(1e-3, Sine(RESONANT_VARPI))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
