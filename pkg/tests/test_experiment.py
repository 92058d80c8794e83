import json
import subprocess
import sys

import numpy as np
import pytest

from qgfvqe.cli import load_config, main
from qgfvqe.core import ParameterError
from qgfvqe.engine import EvolutionConfig, TrajectoryRecord
from qgfvqe.experiment import (
    OUTPUT_ENV,
    PRESETS,
    AggregationError,
    ExperimentConfig,
    OutlierRule,
    aggregate,
    align_by_iteration,
    filter_outliers,
    load_manifest,
    read_csv,
    resolve_output_dir,
    run_experiment,
    run_seed,
)
from qgfvqe.hamiltonian import TfimParameters

TOML = """
name = "tiny"
phase = "paramagnetic"
n_seeds = 3

[model]
n_qubits = 3
coupling = 0.5
field = 1.0
shift = 3.0

[evolution]
n_steps = 4
learning_rate = 0.1
"""


def tiny(**kw):
    base = dict(
        name="tiny", model=TfimParameters(3, 0.5, 1.0, 3.0), phase="paramagnetic",
        evolution=EvolutionConfig(n_steps=4, learning_rate=0.1), n_seeds=3,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def record(seed, energies):
    r = TrajectoryRecord("qgf", seed)
    for i, e in enumerate(energies):
        r.append(tau=0.1 * i, theta=np.zeros(2), energy=e, fidelity=0.5, cost=0.0, inner_iterations=1,
                 cumulative_iterations=i, stalled=False, flagged=False)
    return r


def test_outlier_rule():
    recs = [record(s, [5.0, e]) for s, e in enumerate([1.0, 1.1, 0.9, 1.05, 0.95, 9.0])]
    kept, rejected = filter_outliers(recs, OutlierRule())
    assert [r.seed for r in kept] == [0, 1, 2, 3, 4]
    assert rejected[0][0] == 5 and "IQR" in rejected[0][1]
    kept, rejected = filter_outliers(recs, OutlierRule(enabled=False))
    assert len(kept) == 6 and not rejected


def test_aggregate_statistics():
    curve = aggregate([record(0, [1.0, 2.0]), record(1, [3.0, 6.0])])
    np.testing.assert_allclose(curve.energy_mean, [2.0, 4.0])
    np.testing.assert_allclose(curve.energy_std, [np.sqrt(2), np.sqrt(8)])
    assert curve.retained_n == 2
    single = aggregate([record(0, [1.0, 2.0])])
    np.testing.assert_allclose(single.energy_std, 0.0)
    with pytest.raises(AggregationError):
        aggregate([record(0, [1.0]), record(1, [1.0, 2.0])])
    with pytest.raises(AggregationError):
        aggregate([])


def test_align_by_iteration():
    r = TrajectoryRecord("qgf", 0)
    for e, cum in [(3.0, 0), (2.0, 4), (1.0, 7)]:
        r.append(tau=0.0, theta=np.zeros(1), energy=e, fidelity=0.0, cost=0.0, inner_iterations=0,
                 cumulative_iterations=cum, stalled=False, flagged=False)
    out = align_by_iteration(r, 8)
    assert out.energy == [3.0] * 4 + [2.0] * 3 + [1.0] * 2
    assert out.cumulative_iterations == list(range(9))


def test_run_writes_outputs(tmp_path):
    result = run_experiment(tiny(), tmp_path)
    rows = read_csv(tmp_path / "aggregate.csv")
    assert len(rows) == 5
    assert list(rows[0]) == ["step", "tau", "energy_mean", "energy_std", "fidelity_mean", "retained_n"]
    assert float(rows[-1]["energy_mean"]) == pytest.approx(result.curve.energy_mean[-1])
    traj = read_csv(tmp_path / "trajectories.csv")
    assert len(traj) == 3 * 5
    # the aggregate is recomputable from the per-seed rows
    finals = [float(r["energy"]) for r in traj if r["step"] == "4" and r["retained"] == "1"]
    assert np.mean(finals) == pytest.approx(float(rows[-1]["energy_mean"]), abs=1e-12)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seeds"] == [0, 1, 2]


def test_outputs_are_byte_identical(tmp_path):
    run_experiment(tiny(), tmp_path / "a")
    cfg = load_manifest(tmp_path / "a" / "manifest.json")
    run_experiment(cfg, tmp_path / "b")
    for name in ("aggregate.csv", "trajectories.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_round_trip(tmp_path):
    cfg = tiny(init_mode="zeros_perturbed", outlier_rule=OutlierRule(factor=2.0))
    run_experiment(cfg, tmp_path)
    assert load_manifest(tmp_path / "manifest.json") == cfg


def test_seed_results_independent_of_order():
    cfg = tiny()
    forward = [run_seed(cfg, s).energy for s in (0, 1, 2)]
    backward = [run_seed(cfg, s).energy for s in (2, 1, 0)][::-1]
    assert forward == backward


def test_output_dir_resolution(monkeypatch, tmp_path):
    cfg = tiny()
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert resolve_output_dir(cfg) == tmp_path / "tiny"
    assert resolve_output_dir(cfg, tmp_path / "x") == tmp_path / "x"


def test_config_validation():
    with pytest.raises(ParameterError):
        tiny(phase="critical")
    with pytest.raises(ParameterError):
        tiny(align="iteration")
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"name": "x", "phase": "paramagnetic"})


def test_presets_cover_published_runs():
    assert [len(PRESETS[k]()) for k in ("fig2", "fig3", "fig4")] == [4, 6, 4]
    fig4 = PRESETS["fig4"]()
    assert {c.model.shift for c in fig4} == {11.0}
    assert all(c.evolution.noise_p == 1e-4 and c.n_seeds == 100 for c in fig4)


def test_cli_run_and_oracle(tmp_path, capsys):
    cfg_path = tmp_path / "tiny.toml"
    cfg_path.write_text(TOML)
    assert load_config(cfg_path) == tiny()
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "aggregate.csv").exists()
    capsys.readouterr()
    assert main(["oracle", "--config", str(cfg_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["eigenvalues"]) == 8
    assert report["ground_energy"] == pytest.approx(min(report["eigenvalues"]))


def test_cli_reports_errors_as_json(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(TOML.replace('"paramagnetic"', '"critical"'))
    assert main(["run", "--config", str(bad)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "parameter"
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "io"


def test_cli_check_subprocess():
    proc = subprocess.run([sys.executable, "-m", "qgfvqe", "check"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout
    assert "FAIL" not in proc.stdout
