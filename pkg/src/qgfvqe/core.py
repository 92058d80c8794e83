"""Dense state-vector and density-matrix primitives.

States are plain ``numpy`` complex arrays. Qubit 0 is the most significant
bit of the computational-basis index, so for ``n`` qubits the amplitude of
``|b_0 b_1 ... b_{n-1}>`` sits at index ``sum(b_q << (n - 1 - q))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

ALGEBRAIC_TOL = 1e-12
SPECTRAL_TOL = 1e-10


class QGFError(Exception):
    """Base error; ``category`` is the machine-readable tag used by the CLI."""

    category = "error"


class DimensionError(QGFError, ValueError):
    category = "dimension"


class DegenerateStateError(QGFError, ValueError):
    category = "degenerate_state"


class ParameterError(QGFError, ValueError):
    category = "parameter"


PAULI_LETTERS = "IXYZ"

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """A weighted tensor product of single-qubit Paulis, e.g. ``PauliString("ZZII", -0.5)``."""

    letters: str
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        letters = self.letters.upper()
        if not letters or any(c not in PAULI_LETTERS for c in letters):
            raise ParameterError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.letters) if c != "I")


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise DimensionError(f"dimension {dim} is not a power of two >= 2")
    return n


@lru_cache(maxsize=4096)
def pauli_action(letters: str) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(source, phase)`` with ``(P psi)[c] = phase[c] * psi[source[c]]``.

    Works for any leading axis, so a matrix of column states can be indexed
    with ``psi[source] * phase[:, None]``.
    """
    n = len(letters)
    dim = 1 << n
    flip = 0
    for q, c in enumerate(letters):
        if c in "XY":
            flip |= 1 << (n - 1 - q)
    source = np.arange(dim) ^ flip
    # phase picked up by the basis state being mapped, evaluated at its source index
    phase = np.ones(dim, dtype=complex)
    for q, c in enumerate(letters):
        bit = (source >> (n - 1 - q)) & 1
        if c == "Z":
            phase *= 1 - 2 * bit
        elif c == "Y":
            # Y|0> = i|1>, Y|1> = -i|0>
            phase *= np.where(bit == 0, 1j, -1j)
    source.setflags(write=False)
    phase.setflags(write=False)
    return source, phase


def apply_pauli_string(s: PauliString, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] != 1 << s.n_qubits:
        raise DimensionError(
            f"Pauli string on {s.n_qubits} qubits applied to dimension {psi.shape[0]}"
        )
    if s.is_identity:
        return s.coefficient * psi
    source, phase = pauli_action(s.letters)
    out = psi[source]
    out *= phase.reshape((-1,) + (1,) * (psi.ndim - 1))
    out *= s.coefficient
    return out


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def inner_product(phi: np.ndarray, psi: np.ndarray) -> complex:
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    _check_same(phi, psi)
    return complex(np.vdot(phi, psi))


def fidelity_pure(phi: np.ndarray, psi: np.ndarray) -> float:
    return float(min(1.0, abs(inner_product(phi, psi)) ** 2))


def fidelity_mixed(rho: np.ndarray, psi: np.ndarray) -> float:
    rho = np.asarray(rho)
    psi = np.asarray(psi)
    _check_same(rho, psi)
    return float(np.real(np.vdot(psi, rho @ psi)))


def normalize(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if not np.isfinite(norm) or norm < 1e-300:
        raise DegenerateStateError("cannot normalize a zero vector")
    return psi / norm


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def maximally_mixed(n_qubits: int) -> np.ndarray:
    dim = 1 << n_qubits
    return np.eye(dim, dtype=complex) / dim


def check_density_matrix(rho: np.ndarray, atol: float = ALGEBRAIC_TOL) -> None:
    """Raise ``DimensionError``/``ParameterError`` unless ``rho`` is a valid state."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    n_qubits_of(rho.shape[0])
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > atol:
        raise ParameterError(f"density matrix not Hermitian (residual {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > atol:
        raise ParameterError(f"density matrix trace {tr:.12g} != 1")
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lam < -SPECTRAL_TOL:
        raise ParameterError(f"density matrix has negative eigenvalue {lam:.3e}")
