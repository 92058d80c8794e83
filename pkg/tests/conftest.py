from functools import reduce

import numpy as np
import pytest

from qgfvqe.ansatz import AnsatzSpec
from qgfvqe.hamiltonian import TfimParameters, build_tfim

ACCEPTANCE_LINES: list[str] = []

# Independent dense reference built from explicit Kronecker products.
I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_op(n, ops):
    """``ops`` maps qubit -> letter; qubit 0 is the leftmost Kronecker factor."""
    return reduce(np.kron, [PAULI[ops.get(q, "I")] for q in range(n)])


def dense_tfim(n, J, g, shift):
    H = shift * np.eye(2**n, dtype=complex)
    for i in range(n):
        H -= J * kron_op(n, {i: "Z", (i + 1) % n: "Z"})
        H += g * kron_op(n, {i: "X"})
    return H


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["ferromagnetic", "paramagnetic"])
def phase(request):
    return request.param


PHASE_PARAMS = {"ferromagnetic": (1.0, 0.5), "paramagnetic": (0.5, 1.0)}


@pytest.fixture
def tfim4(phase):
    J, g = PHASE_PARAMS[phase]
    p = TfimParameters(4, J, g, 8.5)
    return p, build_tfim(p), AnsatzSpec.for_tfim(p, initial_state_kind=phase)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
