"""Initial states and the layered QAOA trial state.

Parameter ``k = 2*l`` drives the transverse-field generator of layer ``l`` and
``k = 2*l + 1`` its ZZ generator. Layers run ``l = 0, 1, ...`` in time order
and inside a layer the ZZ rotation acts before the X rotation, i.e.

    |psi(theta)> = ... e^{-i theta_2 h_x} e^{-i theta_3 h_zz} e^{-i theta_0 h_x} e^{-i theta_1 h_zz} |psi_i>

Every generator term is exponentiated exactly (terms inside one generator
commute), and in noisy runs every term rotation is followed by one
depolarizing "noise site" per qubit it touches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import (
    DimensionError,
    ParameterError,
    normalize,
    pauli_action,
    projector,
)
from .hamiltonian import PauliSumHamiltonian, TfimParameters, tfim_x_part, tfim_zz_part
from .noise import apply_depolarizing, apply_global_depolarizing, check_probability, draw_pauli_codes

INITIAL_KINDS = ("ferromagnetic", "paramagnetic", "custom")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_Z = np.diag([1.0, -1.0]).astype(complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def preparation_gates(kind: str, n: int) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    """Gate list producing the named initial state from ``|0...0>``."""
    if n < 2:
        raise ParameterError(f"initial state needs n >= 2, got {n}")
    if kind == "ferromagnetic":
        return [(_H, (q,)) for q in range(n)] + [(_Z, (q,)) for q in range(n)]
    if kind == "paramagnetic":
        gates = [(_H, (0,))]
        gates += [(_CNOT, (q, q + 1)) for q in range(n - 1)]
        gates += [(_Z, (q,)) for q in range(n)]
        return gates
    raise ParameterError(f"unknown initial state kind {kind!r}")


def _apply_gate(states: np.ndarray, gate: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Apply a 1- or 2-qubit gate to the leading (state) axis of ``states``."""
    rest = states.shape[1:]
    t = states.reshape((2,) * n + (-1,))
    k = len(qubits)
    g = gate.reshape((2,) * (2 * k))
    t = np.tensordot(g, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape((1 << n,) + rest)


def prepare_initial(kind: str, n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    for gate, qubits in preparation_gates(kind, n):
        psi = _apply_gate(psi, gate, qubits, n)
    return psi


@dataclass(frozen=True)
class _Term:
    param: int
    coefficient: float
    source: np.ndarray
    phase: np.ndarray
    support: tuple[int, ...]
    diagonal: bool
    real_phase: bool


@dataclass(frozen=True, eq=False)
class AnsatzSpec:
    n_qubits: int
    generator_zz: PauliSumHamiltonian
    generator_x: PauliSumHamiltonian
    layers: int = 4
    initial_state_kind: str = "ferromagnetic"
    custom_initial: np.ndarray | None = field(default=None, repr=False)
    noise_on_preparation: bool = False

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ParameterError("ansatz needs at least one layer")
        if self.initial_state_kind not in INITIAL_KINDS:
            raise ParameterError(f"unknown initial state kind {self.initial_state_kind!r}")
        for gen in (self.generator_zz, self.generator_x):
            if gen.n_qubits != self.n_qubits:
                raise DimensionError("generator size does not match ansatz")
            if any(t.is_identity for t in gen.terms):
                raise ParameterError("ansatz generators must not contain an identity term")
        if self.initial_state_kind == "custom":
            if self.custom_initial is None:
                raise ParameterError("custom initial state requires custom_initial")
            if len(self.custom_initial) != 1 << self.n_qubits:
                raise DimensionError("custom initial state has wrong dimension")

    @classmethod
    def for_tfim(
        cls, params: TfimParameters, layers: int = 4, initial_state_kind: str = "ferromagnetic", **kw
    ) -> "AnsatzSpec":
        return cls(
            params.n_qubits,
            tfim_zz_part(params),
            tfim_x_part(params),
            layers=layers,
            initial_state_kind=initial_state_kind,
            **kw,
        )

    @property
    def n_params(self) -> int:
        return 2 * self.layers

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def generator(self, k: int) -> PauliSumHamiltonian:
        return self.generator_x if k % 2 == 0 else self.generator_zz

    @cached_property
    def initial_state(self) -> np.ndarray:
        if self.initial_state_kind == "custom":
            psi = normalize(self.custom_initial)
        else:
            psi = prepare_initial(self.initial_state_kind, self.n_qubits)
        psi.setflags(write=False)
        return psi

    @cached_property
    def _prep_gates(self):
        if self.initial_state_kind == "custom":
            return []
        return preparation_gates(self.initial_state_kind, self.n_qubits)

    @cached_property
    def _terms(self) -> tuple[_Term, ...]:
        # time-ordered term rotations of the whole circuit
        out = []
        for layer in range(self.layers):
            for k in (2 * layer + 1, 2 * layer):
                for t in self.generator(k).terms:
                    source, phase = pauli_action(t.letters)
                    diagonal = set(t.letters) <= {"I", "Z"}
                    trivial = bool(np.all(phase == 1))
                    out.append(_Term(k, t.coefficient, source, phase, t.support, diagonal, trivial))
        return tuple(out)

    @property
    def n_prep_sites(self) -> int:
        if not self.noise_on_preparation:
            return 0
        return sum(len(q) for _, q in self._prep_gates)

    @property
    def n_noise_sites(self) -> int:
        return self.n_prep_sites + sum(len(t.support) for t in self._terms)

    @cached_property
    def _qubit_flips(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        # (source, phase) of X, Y, Z on each qubit
        n = self.n_qubits
        out = []
        for q in range(n):
            out.append(
                tuple(
                    pauli_action("I" * q + c + "I" * (n - q - 1)) for c in "XYZ"
                )
            )
        return tuple(out)


def _check_theta(spec: AnsatzSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise DimensionError(f"expected {spec.n_params} parameters, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ParameterError("parameters must be finite")
    return theta


def _rotate(work: np.ndarray, term: _Term, angle: float) -> np.ndarray:
    c, s = np.cos(angle * term.coefficient), np.sin(angle * term.coefficient)
    if term.diagonal:
        return work * (c - 1j * s * term.phase)[:, None, None]
    flipped = work[term.source]
    if not term.real_phase:
        flipped *= term.phase[:, None, None]
    flipped *= -1j * s
    out = work * c
    out += flipped
    return out


def _apply_codes(work: np.ndarray, spec: AnsatzSpec, qubit: int, codes: np.ndarray) -> None:
    """Apply sampled Paulis in place; ``codes`` has one entry per trajectory (last axis)."""
    for code in (1, 2, 3):
        cols = np.nonzero(codes == code)[0]
        if cols.size:
            source, phase = spec._qubit_flips[qubit][code - 1]
            work[:, :, cols] = work[source][:, :, cols] * phase[:, None, None]


def simulate(
    spec: AnsatzSpec,
    theta,
    codes: np.ndarray | None = None,
    derivatives: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Run the circuit on a batch of trajectories.

    ``codes`` is an ``(n_noise_sites, T)`` array of sampled Paulis (0 = none);
    ``None`` means one noiseless trajectory. Returns ``states`` of shape
    ``(dim, T)`` and, when requested, ``d states / d theta_k`` of shape
    ``(n_params, dim, T)`` for the same noise realization.
    """
    theta = _check_theta(spec, theta)
    n_traj = 1 if codes is None else codes.shape[1]
    if codes is not None and codes.shape[0] != spec.n_noise_sites:
        raise DimensionError(f"expected {spec.n_noise_sites} noise sites, got {codes.shape[0]}")
    active = set() if codes is None else set(np.nonzero(codes.any(axis=1))[0].tolist())
    slots = 1 + (spec.n_params if derivatives else 0)
    work = np.zeros((spec.dim, slots, n_traj), dtype=complex)
    site = 0

    if codes is not None and spec.noise_on_preparation:
        base = np.zeros((spec.dim, 1, n_traj), dtype=complex)
        base[0] = 1.0
        for gate, qubits in spec._prep_gates:
            base = _apply_gate(base, gate, qubits, spec.n_qubits)
            for q in qubits:
                if site in active:
                    _apply_codes(base, spec, q, codes[site])
                site += 1
        work[:, 0, :] = base[:, 0, :]
    else:
        work[:, 0, :] = spec.initial_state[:, None]

    for term in spec._terms:
        angle = theta[term.param]
        if angle != 0.0:
            work = _rotate(work, term, angle)
        if derivatives:
            # d/dtheta of this factor inserts -i c P right after it
            work[:, 1 + term.param, :] += (-1j * term.coefficient) * (
                work[term.source, 0, :] * term.phase[:, None]
            )
        for q in term.support:
            if site in active and angle != 0.0:
                _apply_codes(work, spec, q, codes[site])
            site += 1

    states = work[:, 0, :]
    derivs = np.moveaxis(work[:, 1:, :], 1, 0) if derivatives else None
    return states, derivs


def prepare_state(spec: AnsatzSpec, theta) -> np.ndarray:
    states, _ = simulate(spec, theta)
    return normalize(states[:, 0])


def differential_states(spec: AnsatzSpec, theta) -> np.ndarray:
    """All ``d|psi>/d theta_k`` as rows of an ``(n_params, dim)`` array."""
    _, derivs = simulate(spec, theta, derivatives=True)
    return derivs[:, :, 0]


def differential_state(spec: AnsatzSpec, theta, k: int) -> np.ndarray:
    if not (0 <= k < spec.n_params):
        raise ParameterError(f"parameter index {k} out of range [0, {spec.n_params})")
    return differential_states(spec, theta)[k]


def _rotate_rho(rho: np.ndarray, term: _Term, angle: float) -> np.ndarray:
    a = _rotate(rho[:, :, None], term, angle)[:, :, 0]
    return _rotate(a.conj().T[:, :, None], term, angle)[:, :, 0].conj().T


def prepare_state_noisy(spec: AnsatzSpec, theta, p: float, mode: str = "per_qubit") -> np.ndarray:
    """Density-matrix propagation with depolarizing noise after every executed rotation."""
    theta = _check_theta(spec, theta)
    p = check_probability(p)
    if mode not in ("per_qubit", "global"):
        raise ParameterError(f"unknown noise mode {mode!r}")

    def noisy(rho, qubits):
        if mode == "global":
            return apply_global_depolarizing(rho, p)
        for q in qubits:
            rho = apply_depolarizing(rho, q, p)
        return rho

    if spec.noise_on_preparation and p > 0:
        rho = np.zeros((spec.dim, spec.dim), dtype=complex)
        rho[0, 0] = 1.0
        for gate, qubits in spec._prep_gates:
            rho = _apply_gate(rho, gate, qubits, spec.n_qubits)
            rho = _apply_gate(rho.conj().T, gate, qubits, spec.n_qubits).conj().T
            rho = noisy(rho, qubits)
    else:
        rho = projector(spec.initial_state)

    for term in spec._terms:
        angle = theta[term.param]
        if angle == 0.0:
            continue
        rho = _rotate_rho(rho, term, angle)
        if p > 0:
            rho = noisy(rho, term.support)
    return (rho + rho.conj().T) / 2


def sample_codes(spec: AnsatzSpec, p: float, rng: np.random.Generator, n_traj: int = 1) -> np.ndarray:
    return draw_pauli_codes(rng, p, (spec.n_noise_sites, n_traj))


def sample_trajectories(
    spec: AnsatzSpec, theta, p: float, rng: np.random.Generator, n_traj: int
) -> np.ndarray:
    """``(dim, n_traj)`` array of normalized pure-state samples."""
    states, _ = simulate(spec, theta, sample_codes(spec, p, rng, n_traj))
    return states / np.linalg.norm(states, axis=0)


def sample_trajectory(spec: AnsatzSpec, theta, p: float, rng: np.random.Generator) -> np.ndarray:
    return sample_trajectories(spec, theta, p, rng, 1)[:, 0]
