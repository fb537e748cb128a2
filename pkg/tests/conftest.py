import math

import numpy as np
import pytest

from bohmflow.werner import BathParams, WernerParams

ACCEPTANCE_LINES = []


@pytest.fixture
def bell():
    return WernerParams.from_a(math.sqrt(0.5), 1.0)


@pytest.fixture
def werner04():
    return WernerParams.from_a(math.sqrt(0.5), 0.4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def closed():
    return BathParams(0.0)


@pytest.fixture
def record_criterion():
    """Collect one pass/fail line per acceptance criterion."""

    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
