import numpy as np
import pytest

from axisonic.background import GasConfig, calibrate_force, linear_force, solve_background, verify_multiplier
from axisonic.basis import build_basis
from axisonic.config import DEMO_CONFIG

DEMO_GAS = GasConfig(1.4, 1.0, 0.5, -2.0, 1.0)


def demo_flow(M=160):
    return solve_background(DEMO_GAS, calibrate_force(linear_force(1.0), DEMO_GAS), M)


@pytest.fixture(scope="session")
def flow():
    return demo_flow(160)


@pytest.fixture(scope="session")
def basis():
    return build_basis(12, 96)


@pytest.fixture(scope="session")
def small_basis():
    return build_basis(8, 48)


@pytest.fixture(scope="session")
def certificate(flow):
    return verify_multiplier(flow)


@pytest.fixture
def demo_config_path(tmp_path):
    path = tmp_path / "demo.cfg"
    path.write_text(DEMO_CONFIG, encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


# one line per acceptance criterion, filled by test_acceptance and printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
