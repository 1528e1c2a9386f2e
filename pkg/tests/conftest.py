import numpy as np
import pytest

from uasw.config import DEFAULT_CONFIG
from uasw.radar_sim import Scene, simulate_session

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def config():
    return DEFAULT_CONFIG


@pytest.fixture
def leak_only_frames():
    """Noise-free stream holding only the leakage peak at tap 3."""
    return list(simulate_session(Scene(leakage_tap=3), duration_ms=600.0, seed=0))


@pytest.fixture
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
