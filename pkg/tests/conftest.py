import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from holm.core import NlsProblem  # noqa: E402


def identity_problem(m=2):
    return NlsProblem("identity", m, m, lambda x: x.copy(), lambda x: np.eye(m))


def shifted_problem(b=(1.0, 2.0)):
    b = np.asarray(b, dtype=float)
    return NlsProblem("shifted", b.size, b.size, lambda x: x - b, lambda x: np.eye(b.size), x0=np.zeros(b.size))


def cubic_problem():
    return NlsProblem("cubic", 1, 1, lambda x: x ** 3, lambda x: np.array([[3 * x[0] ** 2]]), x0=np.ones(1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance verdicts, echoed in the terminal summary so they show without -s
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
