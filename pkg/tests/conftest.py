import numpy as np
import pytest

from stepstone.lattice import nearest4
from stepstone.model import LimitParams, ModelParams

# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def example_limit():
    """The worked example: L = 100, N = 5, nu = 0.2, sigma^2 = 2, beta = 0.4."""
    return LimitParams.from_model(100, 5, 0.2, 2.0, 0.4)


@pytest.fixture
def small_model():
    return ModelParams(L=20, N=2, nu=0.5, kernel=nearest4())
