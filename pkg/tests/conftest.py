import numpy as np
import pytest
from hypothesis import strategies as st

from etscl import evidence


def random_masses(rng, n, K, u_min=1e-3):
    """Random valid (b, u) rows: a Dirichlet draw over K + 1 slots, u kept away from 0."""
    raw = rng.dirichlet(np.ones(K + 1), size=n)
    u = np.maximum(raw[:, -1], u_min)
    b = raw[:, :-1] / raw[:, :-1].sum(axis=1, keepdims=True) * (1 - u)[:, None]
    return b, u


@st.composite
def mass_sets(draw, K=3):
    weights = draw(st.lists(st.floats(0.0, 10.0), min_size=K, max_size=K))
    u = draw(st.floats(1e-3, 1.0))
    total = sum(weights)
    b = np.zeros(K) if total == 0 else np.array(weights) / total * (1 - u)
    if total == 0:
        u = 1.0
    return evidence.MassSet(b, 1.0 - b.sum() if total else u)


@st.composite
def evidence_vectors(draw, K=3, max_value=1e3):
    return np.array(draw(st.lists(st.floats(0.0, max_value), min_size=K, max_size=K)))


@pytest.fixture
def rng():
    return np.random.default_rng(20241019)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
