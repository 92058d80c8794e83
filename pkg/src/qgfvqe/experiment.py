"""Seeded multi-run batches, outlier filtering, aggregation and CSV/JSON output."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import AnsatzSpec
from .core import ParameterError, QGFError
from .engine import (
    EvolutionConfig,
    TrajectoryRecord,
    initial_parameters,
    run_baseline_vqe,
    run_qgf_evolution,
)
from .hamiltonian import TfimParameters, build_tfim
from .oracle import GroundTruth, diagonalize, ground_truth

log = logging.getLogger(__name__)

OUTPUT_ENV = "QGFVQE_OUTPUT_DIR"
PHASE_INITIAL_STATE = {"ferromagnetic": "ferromagnetic", "paramagnetic": "paramagnetic"}
METHODS = ("qgf", "vqe")
INIT_MODES = ("random_uniform", "zeros_perturbed")
ALIGNMENTS = ("step", "iteration")


class AggregationError(QGFError):
    category = "aggregation"


class OutputError(QGFError, OSError):
    category = "io"


@dataclass
class OutlierRule:
    """Reject seeds whose final energy exceeds ``median + factor * IQR``."""

    enabled: bool = True
    factor: float = 3.0


@dataclass
class ExperimentConfig:
    name: str
    model: TfimParameters
    phase: str
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    method: str = "qgf"
    layers: int = 4
    n_seeds: int = 50
    base_seed: int = 0
    init_mode: str = "random_uniform"
    perturbation_scale: float = 1e-3
    initial_state_kind: str | None = None  # None -> the phase's default
    noise_on_preparation: bool = False
    align: str = "step"
    outlier_rule: OutlierRule = field(default_factory=OutlierRule)
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.phase not in PHASE_INITIAL_STATE:
            raise ParameterError(f"unknown phase {self.phase!r}")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.init_mode not in INIT_MODES:
            raise ParameterError(f"unknown init_mode {self.init_mode!r}")
        if self.align not in ALIGNMENTS:
            raise ParameterError(f"unknown align {self.align!r}")
        if self.n_seeds < 1:
            raise ParameterError("n_seeds must be at least 1")
        if self.perturbation_scale < 0:
            raise ParameterError("perturbation_scale must be non-negative")
        if self.align == "iteration" and self.iteration_grid is None:
            raise ParameterError("iteration alignment needs a total iteration budget")
        if self.workers < 1:
            raise ParameterError("workers must be at least 1")

    @property
    def resolved_initial_state(self) -> str:
        return self.initial_state_kind or PHASE_INITIAL_STATE[self.phase]

    @property
    def iteration_grid(self) -> int | None:
        if self.method == "vqe":
            return self.evolution.baseline_iterations
        return self.evolution.total_iteration_cap

    @property
    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.n_seeds)]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            d["model"] = TfimParameters(**d["model"])
            d["evolution"] = EvolutionConfig(**d.get("evolution", {}))
            d["outlier_rule"] = OutlierRule(**d.get("outlier_rule", {}))
            return cls(**d)
        except (TypeError, KeyError) as exc:
            raise ParameterError(f"invalid experiment config: {exc}") from None


@dataclass
class AggregateCurve:
    step: np.ndarray
    tau: np.ndarray
    energy_mean: np.ndarray
    energy_std: np.ndarray  # sample standard deviation (ddof=1); 0 when one seed is retained
    fidelity_mean: np.ndarray
    retained_n: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    ground: GroundTruth
    records: list[TrajectoryRecord]
    retained: list[TrajectoryRecord]
    rejected: list[tuple[int, str]]
    curve: AggregateCurve


def build_problem(cfg: ExperimentConfig):
    H = build_tfim(cfg.model)
    spec = AnsatzSpec.for_tfim(
        cfg.model,
        layers=cfg.layers,
        initial_state_kind=cfg.resolved_initial_state,
        noise_on_preparation=cfg.noise_on_preparation,
    )
    return H, spec


def run_seed(cfg: ExperimentConfig, seed: int, ground: GroundTruth | None = None) -> TrajectoryRecord:
    """One evolution; the seed's generator draws the initial parameters first, then any noise."""
    H, spec = build_problem(cfg)
    if ground is None:
        ground = ground_truth(diagonalize(H))
    rng = np.random.default_rng(seed)
    theta0 = initial_parameters(spec.n_params, rng, cfg.init_mode, cfg.perturbation_scale)
    evo = dataclasses.replace(cfg.evolution, seed=seed)
    runner = run_qgf_evolution if cfg.method == "qgf" else run_baseline_vqe
    rec = runner(spec, H, evo, ground, theta0=theta0, rng=rng)
    if cfg.align == "iteration":
        rec = align_by_iteration(rec, cfg.iteration_grid)
    return rec


def align_by_iteration(rec: TrajectoryRecord, n_iterations: int) -> TrajectoryRecord:
    """Resample a record onto iterations ``0..n_iterations``, holding the latest completed step."""
    cum = np.asarray(rec.cumulative_iterations)
    out = TrajectoryRecord(method=rec.method, seed=rec.seed)
    for it in range(n_iterations + 1):
        i = int(np.searchsorted(cum, it, side="right")) - 1
        out.append(
            tau=rec.tau[i], theta=rec.theta[i], energy=rec.energy[i], fidelity=rec.fidelity[i],
            cost=rec.cost[i], inner_iterations=rec.inner_iterations[i] if cum[i] == it else 0,
            cumulative_iterations=it, stalled=rec.stalled[i], flagged=rec.flagged[i],
        )
    return out


def filter_outliers(
    records: list[TrajectoryRecord], rule: OutlierRule | None = None
) -> tuple[list[TrajectoryRecord], list[tuple[int, str]]]:
    if not records:
        raise AggregationError("no records to filter")
    rule = rule or OutlierRule()
    if not rule.enabled:
        return list(records), []
    finals = np.array([r.final_energy for r in records])
    q1, med, q3 = np.percentile(finals, [25, 50, 75])
    threshold = med + rule.factor * (q3 - q1)
    retained, rejected = [], []
    for r, e in zip(records, finals):
        if e > threshold:
            reason = f"final energy {e:.6g} > median {med:.6g} + {rule.factor:g}*IQR {q3 - q1:.6g}"
            log.info("rejecting seed %d: %s", r.seed, reason)
            rejected.append((r.seed, reason))
        else:
            retained.append(r)
    if not retained:
        dump = ", ".join(f"{r.seed}:{e:.6g}" for r, e in zip(records, finals))
        raise AggregationError(f"all seeds rejected (final energies {dump})")
    return retained, rejected


def aggregate(records: list[TrajectoryRecord]) -> AggregateCurve:
    if not records:
        raise AggregationError("nothing to aggregate")
    lengths = {len(r) for r in records}
    if len(lengths) != 1:
        raise AggregationError(f"records have unequal lengths {sorted(lengths)}")
    E = np.array([r.energy for r in records])
    F = np.array([r.fidelity for r in records])
    n = len(records)
    std = E.std(axis=0, ddof=1) if n > 1 else np.zeros(E.shape[1])
    return AggregateCurve(
        step=np.arange(E.shape[1]),
        tau=np.asarray(records[0].tau, dtype=float),
        energy_mean=E.mean(axis=0),
        energy_std=std,
        fidelity_mean=F.mean(axis=0),
        retained_n=n,
    )


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None,
                   write: bool = True) -> ExperimentResult:
    H, _ = build_problem(cfg)  # validates the whole configuration before any run
    ground = ground_truth(diagonalize(H))
    seeds = cfg.seeds
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(run_seed, [cfg] * len(seeds), seeds))
    else:
        records = [run_seed(cfg, s, ground) for s in seeds]
    retained, rejected = filter_outliers(records, cfg.outlier_rule)
    curve = aggregate(retained)
    result = ExperimentResult(cfg, ground, records, retained, rejected, curve)
    if write:
        emit_outputs(result, resolve_output_dir(cfg, out_dir))
    return result


def resolve_output_dir(cfg: ExperimentConfig, out_dir=None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    return Path(os.environ.get(OUTPUT_ENV, cfg.output_dir)) / cfg.name


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

AGGREGATE_COLUMNS = ("step", "tau", "energy_mean", "energy_std", "fidelity_mean", "retained_n")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def aggregate_csv(curve: AggregateCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for i in range(len(curve.step)):
        w.writerow([
            _fmt(curve.step[i]), _fmt(curve.tau[i]), _fmt(curve.energy_mean[i]),
            _fmt(curve.energy_std[i]), _fmt(curve.fidelity_mean[i]), _fmt(curve.retained_n),
        ])
    return buf.getvalue()


def trajectories_csv(records: list[TrajectoryRecord], retained_seeds: set[int]) -> str:
    n_params = len(records[0].theta[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["seed", "retained", "step", "tau", "energy", "fidelity", "cost", "inner_iterations",
         "cumulative_iterations", "stalled", "flagged"]
        + [f"theta_{k}" for k in range(n_params)]
    )
    for r in records:
        keep = r.seed in retained_seeds
        for i in range(len(r)):
            w.writerow(
                [_fmt(r.seed), _fmt(keep), _fmt(i), _fmt(r.tau[i]), _fmt(r.energy[i]),
                 _fmt(r.fidelity[i]), _fmt(r.cost[i]), _fmt(r.inner_iterations[i]),
                 _fmt(r.cumulative_iterations[i]), _fmt(r.stalled[i]), _fmt(r.flagged[i])]
                + [_fmt(t) for t in r.theta[i]]
            )
    return buf.getvalue()


def manifest(result: ExperimentResult) -> dict:
    return {
        "package_version": __version__,
        "config": result.config.to_dict(),
        "seeds": result.config.seeds,
        "rejected": [{"seed": s, "reason": why} for s, why in result.rejected],
        "ground_energy": result.ground.energy,
        "ground_degeneracy": result.ground.degeneracy,
    }


def emit_outputs(result: ExperimentResult, out_dir: str | os.PathLike) -> dict[str, Path]:
    out = Path(out_dir)
    retained = {r.seed for r in result.retained}
    files = {
        "aggregate": (out / "aggregate.csv", aggregate_csv(result.curve)),
        "trajectories": (out / "trajectories.csv", trajectories_csv(result.records, retained)),
        "manifest": (out / "manifest.json", json.dumps(manifest(result), indent=2, sort_keys=True) + "\n"),
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        for path, text in files.values():
            path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write outputs to {out}: {exc}") from exc
    return {k: v[0] for k, v in files.items()}


def read_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_manifest(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return ExperimentConfig.from_dict(data["config"])


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

FERRO = dict(coupling=1.0, field=0.5)
PARA = dict(coupling=0.5, field=1.0)
PHASES = {"ferromagnetic": FERRO, "paramagnetic": PARA}


def preset_fig2(n_seeds: int = 50, base_seed: int = 0) -> list[ExperimentConfig]:
    evo = EvolutionConfig(dtau=0.005, n_steps=30, optimizer="gradient_descent",
                          learning_rate=0.1, max_inner_iterations=10)
    return [
        ExperimentConfig(
            name=f"fig2_n{n}_{phase}", model=TfimParameters(n, shift=8.5, **PHASES[phase]),
            phase=phase, evolution=evo, n_seeds=n_seeds, base_seed=base_seed,
        )
        for n in (4, 6)
        for phase in PHASES
    ]


def preset_fig3(n_seeds: int = 50, base_seed: int = 0) -> list[ExperimentConfig]:
    evo = EvolutionConfig(dtau=0.002, n_steps=75, optimizer="mclachlan")
    return [
        ExperimentConfig(
            name=f"fig3_{phase}_shift{shift}", model=TfimParameters(4, shift=shift, **PHASES[phase]),
            phase=phase, evolution=evo, n_seeds=n_seeds, base_seed=base_seed,
        )
        for phase in PHASES
        for shift in (4.5, 5.5, 6.5)
    ]


def preset_fig4(n_seeds: int = 100, base_seed: int = 0) -> list[ExperimentConfig]:
    # n_steps is an upper bound: every step spends at least one iteration of the 500 budget
    evo = EvolutionConfig(dtau=0.005, n_steps=500, optimizer="gradient_descent",
                          learning_rate=0.1, max_inner_iterations=10, noise_p=1e-4,
                          total_iteration_cap=500, baseline_learning_rate=0.01,
                          baseline_iterations=500)
    return [
        ExperimentConfig(
            name=f"fig4_{mode}_{method}", model=TfimParameters(4, shift=11.0, **PARA),
            phase="paramagnetic", evolution=evo, method=method, n_seeds=n_seeds,
            base_seed=base_seed, init_mode=mode, align="iteration",
        )
        for mode in INIT_MODES
        for method in METHODS
    ]


PRESETS = {"fig2": preset_fig2, "fig3": preset_fig3, "fig4": preset_fig4}
