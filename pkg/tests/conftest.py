import logging

import numpy as np
import pytest
from hypothesis import settings

from hilbert_sim.elastica import ElasticaProblem
from hilbert_sim.kinematics import MaterialGrid

settings.register_profile("desk", max_examples=30, deadline=None)
settings.load_profile("desk")


@pytest.fixture(autouse=True)
def _quiet_unresolved_warning(caplog):
    caplog.set_level(logging.ERROR, logger="hilbert_sim")


@pytest.fixture(scope="session")
def grid101():
    return MaterialGrid(101, 1.0)


@pytest.fixture(scope="session")
def uniform_problem(grid101):
    return ElasticaProblem(grid101, np.ones(101), 1.0e4, 1.0)


def random_unitary(rng, n=2):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
