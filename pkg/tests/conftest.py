import warnings

import pytest

warnings.filterwarnings("ignore", module="numba")


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        for key, value in report.user_properties:
            if key == "acceptance":
                _ACCEPTANCE_LINES.append(value)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
