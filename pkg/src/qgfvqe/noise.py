"""Single-qubit depolarizing channel, exact and Kraus-sampled.

The channel is ``E(rho) = (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)``;
``p = 3/4`` fully depolarizes the qubit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import DimensionError, ParameterError, n_qubits_of

PAULI_CODES = ("I", "X", "Y", "Z")


def check_probability(p: float) -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise ParameterError(f"probability {p} outside [0, 1]")
    return p


@dataclass(frozen=True)
class DepolarizingNoise:
    p: float = 0.0
    mode: str = "per_qubit"  # or "global": rho -> (1-p) rho + p I/2^n after each rotation

    def __post_init__(self) -> None:
        check_probability(self.p)
        if self.mode not in ("per_qubit", "global"):
            raise ParameterError(f"unknown noise mode {self.mode!r}")


@lru_cache(maxsize=None)
def _qubit_masks(n: int, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    bit = (np.arange(1 << n) >> (n - 1 - qubit)) & 1
    same = bit[:, None] == bit[None, :]
    flip = np.arange(1 << n) ^ (1 << (n - 1 - qubit))
    return same, flip


def apply_depolarizing(rho: np.ndarray, qubit: int, p: float) -> np.ndarray:
    p = check_probability(p)
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of(rho.shape[0])
    if not (0 <= qubit < n):
        raise DimensionError(f"qubit {qubit} out of range for {n} qubits")
    same, flip = _qubit_masks(n, qubit)
    # keep the qubit-diagonal blocks, add them again with the qubit flipped
    blocks = rho * same
    return (1 - 4 * p / 3) * rho + (2 * p / 3) * (blocks + blocks[flip][:, flip])


def apply_global_depolarizing(rho: np.ndarray, p: float) -> np.ndarray:
    p = check_probability(p)
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    return (1 - p) * rho + (p / dim) * np.trace(rho) * np.eye(dim)


def draw_pauli_codes(rng: np.random.Generator, p: float, size=None) -> np.ndarray:
    """Codes 0..3 for I, X, Y, Z with probabilities ``1-p, p/3, p/3, p/3``."""
    p = check_probability(p)
    u = np.asarray(rng.random(size))
    codes = np.zeros(np.shape(u), dtype=np.int8)
    if p > 0:
        hit = u >= 1 - p
        codes[hit] = 1 + np.minimum(((u[hit] - (1 - p)) * 3 / p).astype(np.int64), 2)
    return codes


def sample_depolarizing(qubit: int, p: float, rng: np.random.Generator) -> tuple[int, str]:
    code = int(draw_pauli_codes(rng, p, 1)[0])
    return qubit, PAULI_CODES[code]
