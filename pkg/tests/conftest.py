from __future__ import annotations

import numpy as np
import pytest

from timesmear.class_operators import KGrid, class_family
from timesmear.linalg_core import State
from timesmear.models import two_level
from timesmear.propagator import TimeSlicing
from timesmear.smearing import make_standard


@pytest.fixture(scope="session")
def qubit_model():
    return two_level(1.0)


@pytest.fixture(scope="session")
def qubit_state(qubit_model):
    return State.pure(qubit_model.space, [0.8, 0.6j])


@pytest.fixture(scope="session")
def qubit_family(qubit_model):
    """H = sigma_z, A = sigma_x, uniform f on [0, 1]; a moderate k grid."""
    f = make_standard("uniform", 1.0)
    return class_family(qubit_model, qubit_model.observables["sx"], f, KGrid(40, 801),
                        TimeSlicing(2048))


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (m + m.conj().T) / 2


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
