import numpy as np
import pytest
from hypothesis import strategies as st

from ctxlearn.valuedist import DiscreteValueDistribution


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def value_dists(draw, max_atoms: int = 5):
    """Random discrete distributions on [0, 1] with positive weights."""
    n = draw(st.integers(1, max_atoms))
    atoms = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=n, max_size=n))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    w = np.array(raw) / sum(raw)
    return DiscreteValueDistribution(atoms, w)


def two_point(a, b, wa=0.5):
    return DiscreteValueDistribution([a, b], [wa, 1 - wa])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
