import math

import numpy as np
import pytest

from singelliptic.model import ProblemSpec, SourceSpec


def manufactured_spec():
    """-u'' = f/u on (0,1) with f = 2x(1-x); the exact solution is x(1-x)."""
    src = SourceSpec.from_callable(lambda x: 2.0 * x[:, 0] * (1.0 - x[:, 0]), m=math.inf)
    return ProblemSpec(p=2.0, theta=0.0, gamma=1.0, source=src)


def suite2d_spec(theta):
    return ProblemSpec(p=1.5, theta=theta, gamma=0.5, dim=2, domain=((0, 1), (0, 1)),
                       source=SourceSpec(value=1.0, m=10.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
