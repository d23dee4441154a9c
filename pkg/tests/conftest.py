import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def mk(t, x, y=0.3):
    """``[[1, 0], [y, 1]] [[e^{t/2}, x e^{t/2}], [0, e^{-t/2}]]`` as a 2x2 complex array."""
    upper = np.array([[np.exp(t / 2), x * np.exp(t / 2)], [0, np.exp(-t / 2)]])
    return np.array([[1, 0], [y, 1]]) @ upper


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
