"""Weighted Pauli-sum Hamiltonians and the shifted periodic transverse-field Ising chain."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (
    SPECTRAL_TOL,
    DimensionError,
    ParameterError,
    PauliString,
    apply_pauli_string,
    pauli_action,
)

DENSE_LIMIT = 12


class SizeLimitError(ParameterError):
    category = "size_limit"


@dataclass(frozen=True)
class PauliSumHamiltonian:
    """``H = sum_l c_l h_l``; immutable, identical strings merged at construction."""

    n_qubits: int
    terms: tuple[PauliString, ...] = ()

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ParameterError("n_qubits must be positive")
        merged: dict[str, float] = {}
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise DimensionError(
                    f"term {t.letters} has length {t.n_qubits}, expected {self.n_qubits}"
                )
            merged[t.letters] = merged.get(t.letters, 0.0) + t.coefficient
        object.__setattr__(
            self, "terms", tuple(PauliString(k, v) for k, v in merged.items())
        )

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def identity_coefficient(self) -> float:
        return sum(t.coefficient for t in self.terms if t.is_identity)

    def without_identity(self) -> "PauliSumHamiltonian":
        return PauliSumHamiltonian(
            self.n_qubits, tuple(t for t in self.terms if not t.is_identity)
        )

    def __add__(self, other: "PauliSumHamiltonian") -> "PauliSumHamiltonian":
        if other.n_qubits != self.n_qubits:
            raise DimensionError("cannot add Hamiltonians on different qubit counts")
        return PauliSumHamiltonian(self.n_qubits, self.terms + other.terms)

    @cached_property
    def dense(self) -> np.ndarray:
        m = as_dense_matrix(self)
        m.setflags(write=False)
        return m

    @cached_property
    def dense_squared(self) -> np.ndarray:
        m = self.dense @ self.dense
        m.setflags(write=False)
        return m


@dataclass(frozen=True)
class TfimParameters:
    n_qubits: int
    coupling: float  # J
    field: float  # g
    shift: float = 0.0  # E_s

    def __post_init__(self) -> None:
        if self.n_qubits < 2:
            raise ParameterError(f"TFIM needs N >= 2, got {self.n_qubits}")


def _letters(n: int, ops: dict[int, str]) -> str:
    return "".join(ops.get(q, "I") for q in range(n))


def tfim_zz_part(p: TfimParameters) -> PauliSumHamiltonian:
    n = p.n_qubits
    terms = [
        PauliString(_letters(n, {i: "Z", (i + 1) % n: "Z"}), -p.coupling)
        for i in range(n)
    ]
    return PauliSumHamiltonian(n, tuple(terms))


def tfim_x_part(p: TfimParameters) -> PauliSumHamiltonian:
    n = p.n_qubits
    return PauliSumHamiltonian(
        n, tuple(PauliString(_letters(n, {i: "X"}), p.field) for i in range(n))
    )


def build_tfim(p: TfimParameters) -> PauliSumHamiltonian:
    """``-J sum Z_n Z_{n+1} + g sum X_n + E_s`` with periodic closure.

    At N=2 the bonds (1,2) and (2,1) are the same string and merge to ``-2J Z Z``.
    """
    n = p.n_qubits
    ident = PauliString("I" * n, p.shift)
    return tfim_zz_part(p) + tfim_x_part(p) + PauliSumHamiltonian(n, (ident,))


def _check_dim(H: PauliSumHamiltonian, psi: np.ndarray) -> None:
    if psi.shape[0] != H.dim:
        raise DimensionError(
            f"Hamiltonian on {H.n_qubits} qubits applied to dimension {psi.shape[0]}"
        )


def apply_h(H: PauliSumHamiltonian, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    _check_dim(H, psi)
    out = np.zeros_like(psi)
    for t in H.terms:
        out += apply_pauli_string(t, psi)
    return out


def apply_h_squared(H: PauliSumHamiltonian, psi: np.ndarray) -> np.ndarray:
    return apply_h(H, apply_h(H, psi))


def apply_h_squared_expanded(H: PauliSumHamiltonian, psi: np.ndarray) -> np.ndarray:
    """``sum_{l,m} c_l c_m h_l h_m psi`` evaluated pair by pair."""
    psi = np.asarray(psi, dtype=complex)
    _check_dim(H, psi)
    out = np.zeros_like(psi)
    for tl in H.terms:
        for tm in H.terms:
            out += apply_pauli_string(tl, apply_pauli_string(tm, psi))
    return out


def expectation(H: PauliSumHamiltonian, psi: np.ndarray, atol: float = 1e-8) -> float:
    psi = np.asarray(psi, dtype=complex)
    _check_dim(H, psi)
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > atol:
        raise ParameterError(f"state not normalized (norm {norm:.12g})")
    val = np.vdot(psi, apply_h(H, psi))
    if abs(val.imag) > SPECTRAL_TOL * max(1.0, abs(val.real)):
        raise ParameterError(f"non-real expectation {val}")
    return float(val.real)


def expectation_mixed(H: PauliSumHamiltonian, rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    _check_dim(H, rho)
    total = 0.0
    for t in H.terms:
        if t.is_identity:
            total += t.coefficient * np.trace(rho).real
            continue
        source, phase = pauli_action(t.letters)
        # Tr(P rho) = sum_c phase[c] rho[source[c], c]
        total += t.coefficient * np.real(np.sum(phase * rho[source, np.arange(H.dim)]))
    return float(total)


def as_dense_matrix(H: PauliSumHamiltonian, limit: int = DENSE_LIMIT) -> np.ndarray:
    if H.n_qubits > limit:
        raise SizeLimitError(f"{H.n_qubits} qubits exceeds dense limit {limit}")
    m = np.zeros((H.dim, H.dim), dtype=complex)
    cols = np.arange(H.dim)
    for t in H.terms:
        if t.is_identity:
            m[cols, cols] += t.coefficient
            continue
        source, phase = pauli_action(t.letters)
        m[cols, source] += t.coefficient * phase
    return m

