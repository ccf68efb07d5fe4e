import functools

import numpy as np
import pytest

from latqm.lattice import Lattice
from latqm.scattering import ScatterParams, run_params


@functools.lru_cache(maxsize=None)
def scatter_run(params: ScatterParams):
    """Full barrier runs are expensive; share them across test modules."""
    return run_params(params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def lat500():
    return Lattice(500)


def random_state(rng, N):
    return rng.normal(size=N) + 1j * rng.normal(size=N)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
