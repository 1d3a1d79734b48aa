import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from microemulsion.model import ModelParams  # noqa: E402


@pytest.fixture
def standard_params():
    return ModelParams(M=0.1, lambda_=0.1, beta=1.0, h0=0.5, g0=-4.0, g2=1.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
