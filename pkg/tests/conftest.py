import numpy as np
import pytest
from hypothesis import strategies as st

from freespec.spectra import Atomic


@st.composite
def atomic_measures(draw, max_atoms=5, lo=-3.0, hi=3.0):
    k = draw(st.integers(1, max_atoms))
    xs = draw(st.lists(st.floats(lo, hi, allow_nan=False), min_size=k, max_size=k, unique=True))
    xs = sorted(set(round(x, 6) for x in xs))
    ws = draw(st.lists(st.floats(0.05, 1.0), min_size=len(xs), max_size=len(xs)))
    total = sum(ws)
    return Atomic(tuple((x, w / total) for x, w in zip(xs, ws)))


def random_atomic(rng: np.random.Generator, k=None, lo=-2.0, hi=2.0) -> Atomic:
    k = k or int(rng.integers(2, 6))
    xs = np.sort(rng.uniform(lo, hi, k))
    ws = rng.uniform(0.1, 1.0, k)
    ws /= ws.sum()
    return Atomic(tuple(zip(xs.tolist(), ws.tolist())))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
