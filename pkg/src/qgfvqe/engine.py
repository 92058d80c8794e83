"""Gaussian-filter VQE: stepwise overlap optimization, McLachlan updates and a plain-VQE baseline.

Each evolution step moves the parameters from ``theta_t`` to ``theta_{t+1}`` so
that the trial state tracks ``(1 - dtau H^2)|psi(theta_t)>``, with cost

    C(theta') = -| <psi(theta')|psi(theta_t)> - dtau <psi(theta')|H^2|psi(theta_t)> |.

Overlaps are evaluated directly on simulated states. With noise, every term
is averaged over sampled Pauli trajectories; the noise realization is frozen
for the duration of one step so the cost is a smooth function of ``theta'``
and the stall rule compares like with like.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzSpec, prepare_state_noisy, sample_codes, simulate
from .core import ParameterError, QGFError
from .hamiltonian import PauliSumHamiltonian, apply_h, apply_h_squared_expanded
from .oracle import GroundTruth, diagonalize, ground_truth

log = logging.getLogger(__name__)

OPTIMIZERS = ("gradient_descent", "adam", "mclachlan")
MODULUS_FLOOR = 1e-14


class IllPosedUpdateError(QGFError, ValueError):
    category = "ill_posed_update"


@dataclass
class EvolutionConfig:
    dtau: float = 0.005
    n_steps: int = 30
    optimizer: str = "gradient_descent"
    learning_rate: float = 0.2
    max_inner_iterations: int = 10
    stall_tolerance: float = 1e-9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    mclachlan_regularization: float = 1e-6
    mclachlan_sign: float = 1.0
    noise_p: float = 0.0
    noise_mode: str = "per_qubit"
    n_trajectories: int = 32
    seed: int = 0
    total_iteration_cap: int | None = None
    baseline_learning_rate: float = 0.01
    baseline_iterations: int = 500

    def __post_init__(self) -> None:
        if not self.dtau > 0:
            raise ParameterError("dtau must be positive")
        if self.n_steps < 0:
            raise ParameterError("n_steps must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate < 0 or self.baseline_learning_rate < 0:
            raise ParameterError("learning rates must be non-negative")
        if self.max_inner_iterations < 1:
            raise ParameterError("max_inner_iterations must be positive")
        if self.stall_tolerance < 0 or self.mclachlan_regularization < 0:
            raise ParameterError("tolerances must be non-negative")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ParameterError("noise_p must lie in [0, 1]")
        if self.n_trajectories < 1:
            raise ParameterError("n_trajectories must be positive")
        if self.total_iteration_cap is not None and self.total_iteration_cap < 1:
            raise ParameterError("total_iteration_cap must be positive")
        if self.baseline_iterations < 0:
            raise ParameterError("baseline_iterations must be non-negative")

    @property
    def tau_total(self) -> float:
        return self.dtau * self.n_steps

    @property
    def noisy(self) -> bool:
        return self.noise_p > 0


@dataclass
class TrajectoryRecord:
    """Per-step log of one run; entry 0 is the starting point."""

    method: str
    seed: int
    tau: list[float] = field(default_factory=list)
    theta: list[np.ndarray] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    fidelity: list[float] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)
    cumulative_iterations: list[int] = field(default_factory=list)
    stalled: list[bool] = field(default_factory=list)
    flagged: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.energy)

    def append(self, **values) -> None:
        for name, value in values.items():
            getattr(self, name).append(value)

    @property
    def final_energy(self) -> float:
        return self.energy[-1]

    @property
    def final_fidelity(self) -> float:
        return self.fidelity[-1]


def initial_parameters(
    n_params: int, rng: np.random.Generator, mode: str = "random_uniform", scale: float = 1e-3
) -> np.ndarray:
    if mode == "random_uniform":
        return rng.uniform(-np.pi, np.pi, n_params)
    if mode == "zeros_perturbed":
        return scale * rng.standard_normal(n_params)
    raise ParameterError(f"unknown init mode {mode!r}")


# ---------------------------------------------------------------------------
# step cost
# ---------------------------------------------------------------------------


@dataclass
class StepNoise:
    """Frozen trajectory samples for both sides of one step's overlap."""

    codes_next: np.ndarray
    codes_curr: np.ndarray

    @classmethod
    def draw(cls, spec: AnsatzSpec, p: float, rng: np.random.Generator, n_traj: int) -> "StepNoise":
        return cls(sample_codes(spec, p, rng, n_traj), sample_codes(spec, p, rng, n_traj))


class StepObjective:
    """Cost and analytic gradient for one step with the target side precomputed."""

    def __init__(self, spec, H, theta_curr, dtau, noise: StepNoise | None = None):
        self.spec = spec
        self.H = H
        self.dtau = float(dtau)
        self.noise = noise
        curr, _ = simulate(spec, theta_curr, None if noise is None else noise.codes_curr)
        # target vectors (1 - dtau H^2)|psi_r>, one column per trajectory
        self.target = curr - self.dtau * (H.dense_squared @ curr)

    def _z(self, states: np.ndarray) -> complex:
        return complex(np.mean(np.einsum("dr,dr->r", states.conj(), self.target)))

    def value(self, theta) -> float:
        states, _ = simulate(self.spec, theta, None if self.noise is None else self.noise.codes_next)
        return -abs(self._z(states))

    def value_and_grad(self, theta) -> tuple[float, np.ndarray, bool]:
        """Returns ``(cost, gradient, flagged)``; ``flagged`` marks the finite-difference fallback."""
        codes = None if self.noise is None else self.noise.codes_next
        states, derivs = simulate(self.spec, theta, codes, derivatives=True)
        z = self._z(states)
        if abs(z) < MODULUS_FLOOR:
            log.warning("step cost modulus %.3e below floor; using finite differences", abs(z))
            return -abs(z), self.fd_grad(theta), True
        dz = np.mean(np.einsum("kdr,dr->kr", derivs.conj(), self.target), axis=1)
        grad = -np.real(np.conj(z) * dz) / abs(z)
        return -abs(z), grad, False

    def fd_grad(self, theta, h: float = 1e-5) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        g = np.empty_like(theta)
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = h
            g[k] = (self.value(theta + e) - self.value(theta - e)) / (2 * h)
        return g


def step_cost(spec, H, theta_next, theta_curr, dtau, noise: StepNoise | None = None) -> float:
    return StepObjective(spec, H, theta_curr, dtau, noise).value(theta_next)


def step_cost_gradient(spec, H, theta_next, theta_curr, dtau, noise: StepNoise | None = None) -> np.ndarray:
    return StepObjective(spec, H, theta_curr, dtau, noise).value_and_grad(theta_next)[1]


# ---------------------------------------------------------------------------
# inner optimizer
# ---------------------------------------------------------------------------


@dataclass
class StepResult:
    theta: np.ndarray
    iterations: int
    stalled: bool
    cost: float
    flagged: bool = False


class _Adam:
    def __init__(self, n, lr, b1, b2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def optimize_step(
    spec: AnsatzSpec,
    H: PauliSumHamiltonian,
    theta_curr,
    config: EvolutionConfig,
    noise: StepNoise | None = None,
    max_iterations: int | None = None,
) -> StepResult:
    """Warm-started first-order minimization of the step cost.

    Stops after ``max_iterations`` (default ``config.max_inner_iterations``) or
    as soon as an iteration improves the cost by less than
    ``config.stall_tolerance``; the best parameters seen are returned.
    """
    limit = config.max_inner_iterations if max_iterations is None else max_iterations
    obj = StepObjective(spec, H, theta_curr, config.dtau, noise)
    theta = np.array(theta_curr, dtype=float)
    cost, grad, flagged = obj.value_and_grad(theta)
    best_theta, best_cost = theta, cost
    adam = None
    if config.optimizer == "adam":
        adam = _Adam(theta.size, config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_epsilon)
    iterations = 0
    stalled = False
    while iterations < limit:
        theta = adam.step(theta, grad) if adam else theta - config.learning_rate * grad
        new_cost, grad, fl = obj.value_and_grad(theta)
        iterations += 1
        flagged |= fl
        if new_cost < best_cost:
            best_theta, best_cost = theta, new_cost
        if cost - new_cost < config.stall_tolerance:
            stalled = True
            break
        cost = new_cost
    return StepResult(best_theta, iterations, stalled, best_cost, flagged)


# ---------------------------------------------------------------------------
# McLachlan
# ---------------------------------------------------------------------------


def mclachlan_A(spec: AnsatzSpec, theta, codes: np.ndarray | None = None) -> np.ndarray:
    """``A_jk = Re <d_j psi|d_k psi>`` (trajectory-averaged when ``codes`` is given)."""
    _, D = simulate(spec, theta, codes, derivatives=True)
    A = np.real(np.einsum("jdr,kdr->jk", D.conj(), D)) / D.shape[2]
    return (A + A.T) / 2


def mclachlan_C(spec: AnsatzSpec, H: PauliSumHamiltonian, theta, codes: np.ndarray | None = None) -> np.ndarray:
    """``C_j = Re(-<d_j psi| H (H |psi>))``."""
    states, D = simulate(spec, theta, codes, derivatives=True)
    h2psi = apply_h(H, apply_h(H, states))
    return -np.real(np.einsum("jdr,dr->j", D.conj(), h2psi)) / D.shape[2]


def mclachlan_C_expanded(spec: AnsatzSpec, H: PauliSumHamiltonian, theta) -> np.ndarray:
    """Same vector via the explicit ``sum_{l,m} c_l c_m h_l h_m`` double sum."""
    states, D = simulate(spec, theta, derivatives=True)
    h2psi = apply_h_squared_expanded(H, states[:, 0])
    return -np.real(D[:, :, 0].conj() @ h2psi)


def mclachlan_velocity(A: np.ndarray, C: np.ndarray, reg: float = 0.0) -> np.ndarray:
    if np.max(np.abs(A)) < MODULUS_FLOOR and np.max(np.abs(C)) > MODULUS_FLOOR:
        raise IllPosedUpdateError("metric A vanishes while C does not")
    M = A + reg * np.eye(len(C))
    return np.linalg.lstsq(M, C, rcond=None)[0]


def mclachlan_update(
    spec: AnsatzSpec,
    H: PauliSumHamiltonian,
    theta,
    dtau: float,
    reg: float = 1e-6,
    sign: float = 1.0,
    codes: np.ndarray | None = None,
) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    A = mclachlan_A(spec, theta, codes)
    C = mclachlan_C(spec, H, theta, codes)
    return theta + dtau * sign * mclachlan_velocity(A, C, reg)


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


class _Reporter:
    """Energy and ground-subspace fidelity of ``|psi(theta)>`` (or its noisy density matrix)."""

    def __init__(self, spec, H, ground, config):
        self.spec, self.H, self.ground, self.config = spec, H, ground, config

    def __call__(self, theta) -> tuple[float, float]:
        if self.config.noisy:
            rho = prepare_state_noisy(self.spec, theta, self.config.noise_p, self.config.noise_mode)
            energy = float(np.real(np.trace(self.H.dense @ rho)))
            return energy, self.ground.fidelity_mixed(rho)
        states, _ = simulate(self.spec, theta)
        psi = states[:, 0]
        energy = float(np.real(np.vdot(psi, self.H.dense @ psi)))
        return energy, self.ground.fidelity(psi)


def _setup(spec, H, config, ground, theta0, rng, init_mode="random_uniform"):
    if ground is None:
        ground = ground_truth(diagonalize(H))
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if theta0 is None:
        theta0 = initial_parameters(spec.n_params, rng, init_mode)
    theta0 = np.array(theta0, dtype=float)
    if theta0.shape != (spec.n_params,):
        raise ParameterError(f"theta0 must have length {spec.n_params}")
    if config.noisy and config.noise_mode != "per_qubit":
        raise ParameterError("trajectory sampling supports only per_qubit noise")
    return ground, rng, theta0


def run_qgf_evolution(
    spec: AnsatzSpec,
    H: PauliSumHamiltonian,
    config: EvolutionConfig,
    ground: GroundTruth | None = None,
    theta0=None,
    rng: np.random.Generator | None = None,
) -> TrajectoryRecord:
    """Evolve ``n_steps`` filter increments from ``theta0``.

    The random source is consumed in a fixed order (initial parameters, then
    per-step noise samples) so a given seed reproduces the record bit for bit.
    Once ``total_iteration_cap`` is spent, the remaining steps are logged with
    unchanged parameters and zero inner iterations.
    """
    ground, rng, theta = _setup(spec, H, config, ground, theta0, rng)
    report = _Reporter(spec, H, ground, config)
    rec = TrajectoryRecord(method="qgf", seed=config.seed)
    e, f = report(theta)
    rec.append(tau=0.0, theta=theta.copy(), energy=e, fidelity=f, cost=float("nan"),
               inner_iterations=0, cumulative_iterations=0, stalled=False, flagged=False)
    used = 0
    cap = config.total_iteration_cap
    for t in range(1, config.n_steps + 1):
        budget = config.max_inner_iterations if cap is None else min(config.max_inner_iterations, cap - used)
        if budget <= 0:
            rec.append(tau=t * config.dtau, theta=theta.copy(), energy=rec.energy[-1],
                       fidelity=rec.fidelity[-1], cost=float("nan"), inner_iterations=0,
                       cumulative_iterations=used, stalled=False, flagged=False)
            continue
        noise = None
        if config.noisy:
            noise = StepNoise.draw(spec, config.noise_p, rng, config.n_trajectories)
        if config.optimizer == "mclachlan":
            theta = mclachlan_update(
                spec, H, theta, config.dtau, config.mclachlan_regularization,
                config.mclachlan_sign, None if noise is None else noise.codes_curr,
            )
            result = StepResult(theta, 1, False, float("nan"))
        else:
            result = optimize_step(spec, H, theta, config, noise, max_iterations=budget)
            theta = np.array(result.theta)
        used += result.iterations
        e, f = report(theta)
        rec.append(tau=t * config.dtau, theta=theta.copy(), energy=e, fidelity=f,
                   cost=result.cost, inner_iterations=result.iterations,
                   cumulative_iterations=used, stalled=result.stalled, flagged=result.flagged)
    return rec


def energy_and_gradient(
    spec: AnsatzSpec, H: PauliSumHamiltonian, theta, codes: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """``E = <psi|H|psi>`` and ``dE/dtheta_k = 2 Re <d_k psi|H|psi>``, trajectory-averaged."""
    states, D = simulate(spec, theta, codes, derivatives=True)
    hpsi = H.dense @ states
    n = states.shape[1]
    energy = float(np.real(np.einsum("dr,dr->", states.conj(), hpsi)) / n)
    grad = 2 * np.real(np.einsum("kdr,dr->k", D.conj(), hpsi)) / n
    return energy, grad


def run_baseline_vqe(
    spec: AnsatzSpec,
    H: PauliSumHamiltonian,
    config: EvolutionConfig,
    ground: GroundTruth | None = None,
    theta0=None,
    rng: np.random.Generator | None = None,
) -> TrajectoryRecord:
    """Plain gradient descent on the energy; one record entry per iteration."""
    ground, rng, theta = _setup(spec, H, config, ground, theta0, rng)
    report = _Reporter(spec, H, ground, config)
    rec = TrajectoryRecord(method="vqe", seed=config.seed)
    e, f = report(theta)
    rec.append(tau=float("nan"), theta=theta.copy(), energy=e, fidelity=f, cost=e,
               inner_iterations=0, cumulative_iterations=0, stalled=False, flagged=False)
    lr = config.baseline_learning_rate
    for it in range(1, config.baseline_iterations + 1):
        codes = None
        if config.noisy:
            codes = sample_codes(spec, config.noise_p, rng, config.n_trajectories)
        sampled_energy, grad = energy_and_gradient(spec, H, theta, codes)
        theta = theta - lr * grad
        e, f = report(theta)
        rec.append(tau=float("nan"), theta=theta.copy(), energy=e, fidelity=f, cost=sampled_energy,
                   inner_iterations=1, cumulative_iterations=it, stalled=False, flagged=False)
    return rec


def config_replace(config: EvolutionConfig, **changes) -> EvolutionConfig:
    return dataclasses.replace(config, **changes)
