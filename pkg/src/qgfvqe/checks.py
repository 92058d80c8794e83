"""Quick numerical self-checks run by ``qgfvqe check``."""

from __future__ import annotations

import numpy as np

from .ansatz import AnsatzSpec, differential_states, prepare_state, prepare_state_noisy
from .core import check_density_matrix
from .engine import (
    StepObjective,
    energy_and_gradient,
    mclachlan_A,
    mclachlan_C,
    mclachlan_C_expanded,
)
from .hamiltonian import TfimParameters, apply_h, apply_h_squared, build_tfim
from .noise import apply_depolarizing
from .oracle import diagonalize, exact_filter_state, ground_truth


def _central(f, theta, h=1e-5):
    g = []
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        g.append((f(theta + e) - f(theta - e)) / (2 * h))
    return np.array(g)


def run_checks(seed: int = 7, n_points: int = 5) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    p = TfimParameters(4, 0.5, 1.0, 8.5)
    H = build_tfim(p)
    spec = AnsatzSpec.for_tfim(p, initial_state_kind="paramagnetic")
    out = []

    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    err = np.max(np.abs(H.dense @ psi - apply_h(H, psi)))
    out.append(("dense H matches term-wise action", err < 1e-12, f"{err:.2e}"))
    err = np.max(np.abs(H.dense @ (H.dense @ psi) - apply_h_squared(H, psi)))
    out.append(("H^2 action matches dense square", err < 1e-10, f"{err:.2e}"))

    worst = {"norm": 0.0, "dpsi": 0.0, "cost": 0.0, "energy": 0.0, "sym": 0.0, "psd": 0.0, "C": 0.0}
    for _ in range(n_points):
        th = rng.uniform(-np.pi, np.pi, spec.n_params)
        th2 = th + 0.1 * rng.normal(size=spec.n_params)
        worst["norm"] = max(worst["norm"], abs(np.linalg.norm(prepare_state(spec, th)) - 1))
        D = differential_states(spec, th)
        k = int(rng.integers(spec.n_params))
        e = np.zeros_like(th)
        e[k] = 1e-5
        fd = (prepare_state(spec, th + e) - prepare_state(spec, th - e)) / 2e-5
        worst["dpsi"] = max(worst["dpsi"], np.max(np.abs(fd - D[k])))
        obj = StepObjective(spec, H, th, 0.005)
        worst["cost"] = max(worst["cost"], np.max(np.abs(obj.value_and_grad(th2)[1] - _central(obj.value, th2))))
        g = energy_and_gradient(spec, H, th)[1]
        fd = _central(lambda t: energy_and_gradient(spec, H, t)[0], th)
        worst["energy"] = max(worst["energy"], np.max(np.abs(g - fd)))
        A = mclachlan_A(spec, th)
        worst["sym"] = max(worst["sym"], np.max(np.abs(A - A.T)))
        worst["psd"] = min(worst["psd"], np.linalg.eigvalsh(A)[0])
        worst["C"] = max(worst["C"], np.max(np.abs(mclachlan_C(spec, H, th) - mclachlan_C_expanded(spec, H, th))))
    out.append(("ansatz state normalized", worst["norm"] < 1e-12, f"{worst['norm']:.2e}"))
    out.append(("differential states vs finite differences", worst["dpsi"] < 1e-6, f"{worst['dpsi']:.2e}"))
    out.append(("step-cost gradient vs finite differences", worst["cost"] < 1e-6, f"{worst['cost']:.2e}"))
    out.append(("energy gradient vs finite differences", worst["energy"] < 1e-6, f"{worst['energy']:.2e}"))
    out.append(("McLachlan A symmetric", worst["sym"] < 1e-12, f"{worst['sym']:.2e}"))
    out.append(("McLachlan A positive semidefinite", worst["psd"] >= -1e-10, f"{worst['psd']:.2e}"))
    out.append(("McLachlan C paths agree", worst["C"] < 1e-10, f"{worst['C']:.2e}"))

    ok = True
    for pl in (0.0, 1e-4, 1e-2, 0.75, 1.0):
        rho = prepare_state_noisy(spec, rng.uniform(-1, 1, spec.n_params), min(pl, 1e-2))
        try:
            check_density_matrix(apply_depolarizing(rho, 1, pl))
        except ValueError:
            ok = False
    out.append(("depolarizing channel keeps density-matrix invariants", ok, ""))

    spectrum = diagonalize(H)
    gt = ground_truth(spectrum)
    taus = np.arange(31) * 0.005
    fids = [gt.fidelity(exact_filter_state(spectrum, spec.initial_state, t)) for t in taus]
    out.append(("exact filter fidelity non-decreasing", bool(np.all(np.diff(fids) >= -1e-10)), f"{fids[-1]:.4f}"))
    return out
