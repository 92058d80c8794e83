"""Exact reference: dense diagonalization, the Gaussian-filtered state and its linearized step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DegenerateStateError, ParameterError, normalize
from .hamiltonian import PauliSumHamiltonian, apply_h_squared, as_dense_matrix

DEGENERACY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    energy: float
    state: np.ndarray
    subspace: np.ndarray  # (dim, degeneracy) orthonormal columns

    @property
    def degeneracy(self) -> int:
        return self.subspace.shape[1]

    def fidelity(self, psi: np.ndarray) -> float:
        """Squared norm of the projection of a pure state onto the ground subspace."""
        amp = self.subspace.conj().T @ psi
        return float(min(1.0, np.real(np.vdot(amp, amp))))

    def fidelity_mixed(self, rho: np.ndarray) -> float:
        return float(np.real(np.trace(self.subspace.conj().T @ rho @ self.subspace)))


def diagonalize(H: PauliSumHamiltonian) -> Spectrum:
    w, v = np.linalg.eigh(as_dense_matrix(H))
    w.setflags(write=False)
    v.setflags(write=False)
    return Spectrum(w, v)


def ground_truth(spec: Spectrum, tol: float = DEGENERACY_TOL) -> GroundTruth:
    w, v = spec.eigenvalues, spec.eigenvectors
    deg = int(np.sum(w - w[0] <= tol))
    return GroundTruth(float(w[0]), v[:, 0].copy(), v[:, :deg].copy())


def exact_filter_state(spec: Spectrum, psi_i: np.ndarray, tau: float) -> np.ndarray:
    """``normalize(sum_j a_j exp(-lambda_j^2 tau) |lambda_j>)`` evaluated in the eigenbasis."""
    if tau < 0:
        raise ParameterError(f"tau must be non-negative, got {tau}")
    amps = spec.eigenvectors.conj().T @ np.asarray(psi_i, dtype=complex)
    # shift exponents by the largest surviving weight to avoid underflow at large tau
    logw = -(spec.eigenvalues**2) * tau
    support = np.abs(amps) > 0
    if not np.any(support):
        raise DegenerateStateError("initial state is the zero vector")
    logw = logw - np.max(logw[support])
    filtered = spec.eigenvectors @ (amps * np.exp(logw))
    try:
        return normalize(filtered)
    except DegenerateStateError:
        raise DegenerateStateError("filter annihilated the state") from None


def exact_linearized_step(H: PauliSumHamiltonian, psi: np.ndarray, dtau: float,
                          lambda_max: float | None = None) -> np.ndarray:
    """One normalized step ``(1 - dtau H^2) psi``.

    ``lambda_max`` (the largest |eigenvalue|) is computed densely when not given.
    """
    if dtau <= 0:
        raise ParameterError(f"step size must be positive, got {dtau}")
    if lambda_max is None:
        lambda_max = float(np.max(np.abs(np.linalg.eigvalsh(H.dense))))
    if dtau * lambda_max**2 >= 1:
        raise ParameterError(
            f"step size {dtau} too large: dtau * lambda_max^2 = {dtau * lambda_max**2:.3f} >= 1"
        )
    psi = np.asarray(psi, dtype=complex)
    return normalize(psi - dtau * apply_h_squared(H, psi))


def linearized_evolution(H: PauliSumHamiltonian, psi: np.ndarray, dtau: float, n_steps: int) -> np.ndarray:
    lam = float(np.max(np.abs(np.linalg.eigvalsh(H.dense))))
    for _ in range(n_steps):
        psi = exact_linearized_step(H, psi, dtau, lambda_max=lam)
    return psi
