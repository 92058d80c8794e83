import numpy as np
import pytest

from conftest import PHASE_PARAMS
from qgfvqe.ansatz import AnsatzSpec, differential_states, prepare_state, sample_codes
from qgfvqe.core import ParameterError
from qgfvqe.engine import (
    EvolutionConfig,
    IllPosedUpdateError,
    StepNoise,
    StepObjective,
    energy_and_gradient,
    initial_parameters,
    mclachlan_A,
    mclachlan_C,
    mclachlan_C_expanded,
    mclachlan_update,
    mclachlan_velocity,
    optimize_step,
    run_baseline_vqe,
    run_qgf_evolution,
    step_cost,
    step_cost_gradient,
)
from qgfvqe.hamiltonian import TfimParameters, build_tfim


def problem(phase="paramagnetic", n=4, shift=8.5):
    J, g = PHASE_PARAMS[phase]
    p = TfimParameters(n, J, g, shift)
    return build_tfim(p), AnsatzSpec.for_tfim(p, initial_state_kind=phase)


def central(f, theta, h=1e-5):
    out = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        out[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def test_step_cost_at_warm_start_equals_filter_norm(rng):
    H, spec = problem()
    theta = rng.normal(size=8)
    psi = prepare_state(spec, theta)
    expected = -abs(1 - 0.005 * np.vdot(psi, H.dense @ H.dense @ psi))
    assert step_cost(spec, H, theta, theta, 0.005) == pytest.approx(expected, abs=1e-12)


def test_step_cost_gradient_against_finite_differences(rng):
    H, spec = problem()
    for _ in range(5):
        curr = rng.uniform(-np.pi, np.pi, 8)
        nxt = curr + 0.2 * rng.normal(size=8)
        g = step_cost_gradient(spec, H, nxt, curr, 0.005)
        fd = central(lambda t: step_cost(spec, H, t, curr, 0.005), nxt)
        np.testing.assert_allclose(g, fd, atol=1e-6)


def test_noisy_step_cost_gradient_against_finite_differences(rng):
    H, spec = problem()
    noise = StepNoise.draw(spec, 0.02, rng, 6)
    curr = rng.normal(size=8)
    obj = StepObjective(spec, H, curr, 0.005, noise)
    nxt = curr + 0.1
    np.testing.assert_allclose(obj.value_and_grad(nxt)[1], obj.fd_grad(nxt), atol=1e-6)


def test_energy_gradient(rng):
    H, spec = problem("ferromagnetic")
    theta = rng.normal(size=8)
    e, g = energy_and_gradient(spec, H, theta)
    psi = prepare_state(spec, theta)
    assert e == pytest.approx(np.vdot(psi, H.dense @ psi).real, abs=1e-12)
    fd = central(lambda t: energy_and_gradient(spec, H, t)[0], theta)
    np.testing.assert_allclose(g, fd, atol=1e-6)


@pytest.mark.parametrize("optimizer", ["gradient_descent", "adam"])
def test_optimize_step_does_not_increase_cost(optimizer, rng):
    H, spec = problem()
    cfg = EvolutionConfig(optimizer=optimizer, learning_rate=0.05)
    theta = rng.normal(size=8)
    start = step_cost(spec, H, theta, theta, cfg.dtau)
    res = optimize_step(spec, H, theta, cfg)
    assert 1 <= res.iterations <= cfg.max_inner_iterations
    assert res.cost <= start
    assert step_cost(spec, H, res.theta, theta, cfg.dtau) == pytest.approx(res.cost)


def test_optimize_step_stalls_at_zero_learning_rate(rng):
    H, spec = problem()
    theta = rng.normal(size=8)
    res = optimize_step(spec, H, theta, EvolutionConfig(learning_rate=0.0))
    assert res.stalled and res.iterations == 1
    np.testing.assert_array_equal(res.theta, theta)


def test_mclachlan_matrices_against_dense(rng):
    H, spec = problem()
    H2 = H.dense @ H.dense
    for _ in range(5):
        theta = rng.uniform(-np.pi, np.pi, 8)
        D = differential_states(spec, theta)
        psi = prepare_state(spec, theta)
        np.testing.assert_allclose(mclachlan_A(spec, theta), np.real(D.conj() @ D.T), atol=1e-10)
        C = -np.real(D.conj() @ (H2 @ psi))
        np.testing.assert_allclose(mclachlan_C(spec, H, theta), C, atol=1e-10)
        np.testing.assert_allclose(mclachlan_C_expanded(spec, H, theta), C, atol=1e-10)


def test_mclachlan_velocity_solves_system(rng):
    M = rng.normal(size=(4, 4))
    A = M @ M.T + np.eye(4)
    C = rng.normal(size=4)
    np.testing.assert_allclose(A @ mclachlan_velocity(A, C), C, atol=1e-12)
    np.testing.assert_allclose(mclachlan_velocity(np.zeros((2, 2)), np.zeros(2)), 0.0)
    with pytest.raises(IllPosedUpdateError):
        mclachlan_velocity(np.zeros((2, 2)), np.ones(2))


def test_mclachlan_update_lowers_squared_energy(rng):
    H, spec = problem()
    H2 = H.dense @ H.dense
    theta = rng.uniform(-1, 1, 8)

    def h2(t):
        psi = prepare_state(spec, t)
        return np.vdot(psi, H2 @ psi).real

    new = mclachlan_update(spec, H, theta, 1e-3)
    assert h2(new) < h2(theta)


def test_mclachlan_noisy_matrices_average_trajectories(rng):
    H, spec = problem()
    theta = rng.normal(size=8)
    codes = sample_codes(spec, 0.0, rng, 3)
    np.testing.assert_allclose(mclachlan_A(spec, theta, codes), mclachlan_A(spec, theta), atol=1e-12)
    np.testing.assert_allclose(mclachlan_C(spec, H, theta, codes), mclachlan_C(spec, H, theta), atol=1e-10)


def test_run_is_deterministic():
    H, spec = problem()
    cfg = EvolutionConfig(n_steps=3, learning_rate=0.1)
    a = run_qgf_evolution(spec, H, cfg, rng=np.random.default_rng(4))
    b = run_qgf_evolution(spec, H, cfg, rng=np.random.default_rng(4))
    assert a.energy == b.energy and a.fidelity == b.fidelity
    assert len(a) == 4 and a.tau == pytest.approx([0, 0.005, 0.01, 0.015])


def test_zero_steps_records_only_start():
    H, spec = problem()
    rec = run_qgf_evolution(spec, H, EvolutionConfig(n_steps=0), theta0=np.zeros(8))
    assert len(rec) == 1
    assert rec.fidelity[0] == pytest.approx(0.3348089866774658, abs=1e-10)


def test_evolution_lowers_energy():
    H, spec = problem("ferromagnetic")
    rec = run_qgf_evolution(spec, H, EvolutionConfig(n_steps=10, learning_rate=0.1),
                            rng=np.random.default_rng(1))
    assert rec.energy[-1] < rec.energy[0]
    assert rec.fidelity[-1] > rec.fidelity[0]


def test_iteration_cap_freezes_remaining_steps():
    H, spec = problem()
    cfg = EvolutionConfig(n_steps=6, total_iteration_cap=12, stall_tolerance=0.0, learning_rate=0.05)
    rec = run_qgf_evolution(spec, H, cfg, rng=np.random.default_rng(2))
    assert rec.cumulative_iterations[-1] == 12
    assert rec.inner_iterations[3:] == [0, 0, 0, 0]
    np.testing.assert_array_equal(rec.theta[-1], rec.theta[2])


def test_noisy_run_reports_mixed_state_values():
    H, spec = problem()
    cfg = EvolutionConfig(n_steps=2, noise_p=1e-3, n_trajectories=4, learning_rate=0.1)
    rec = run_qgf_evolution(spec, H, cfg, rng=np.random.default_rng(0))
    assert all(0 < f < 1 for f in rec.fidelity)


def test_baseline_with_zero_rate_keeps_parameters():
    H, spec = problem()
    cfg = EvolutionConfig(baseline_learning_rate=0.0, baseline_iterations=5)
    rec = run_baseline_vqe(spec, H, cfg, theta0=np.ones(8))
    assert len(rec) == 6
    assert len(set(rec.energy)) == 1
    assert rec.cumulative_iterations == list(range(6))


def test_baseline_descends():
    H, spec = problem()
    cfg = EvolutionConfig(baseline_learning_rate=0.01, baseline_iterations=20)
    rec = run_baseline_vqe(spec, H, cfg, rng=np.random.default_rng(5))
    assert rec.energy[-1] < rec.energy[0]


def test_initial_parameters():
    rng = np.random.default_rng(0)
    th = initial_parameters(8, rng)
    assert np.all((th >= -np.pi) & (th < np.pi))
    small = initial_parameters(8, rng, "zeros_perturbed", 1e-3)
    assert np.max(np.abs(small)) < 1e-2
    with pytest.raises(ParameterError):
        initial_parameters(8, rng, "ones")


@pytest.mark.parametrize("bad", [dict(dtau=0), dict(n_steps=-1), dict(optimizer="lbfgs"),
                                 dict(noise_p=2), dict(max_inner_iterations=0)])
def test_config_validation(bad):
    with pytest.raises(ParameterError):
        EvolutionConfig(**bad)


def test_global_noise_rejected_for_trajectories():
    H, spec = problem()
    with pytest.raises(ParameterError):
        run_qgf_evolution(spec, H, EvolutionConfig(noise_p=0.01, noise_mode="global"))
