"""Command-line entry point: ``qgfvqe {run,preset,oracle,check}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .core import ParameterError, QGFError
from .experiment import (
    PRESETS,
    ExperimentConfig,
    OutputError,
    build_problem,
    resolve_output_dir,
    run_experiment,
)
from .oracle import diagonalize, ground_truth

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("qgfvqe")


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML experiment config, or the ``config`` block of an emitted manifest."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
            data = data.get("config", data)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ParameterError(f"cannot parse {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def _summary(result) -> str:
    c = result.curve
    return (
        f"{result.config.name}: E_final={c.energy_mean[-1]:.6f} (exact {result.ground.energy:.6f}) "
        f"F_final={c.fidelity_mean[-1]:.6f} retained={c.retained_n}/{result.config.n_seeds}"
    )


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.workers:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    out = resolve_output_dir(cfg, args.out)
    result = run_experiment(cfg, out)
    print(_summary(result))
    print(f"wrote {out}")
    return 0


def cmd_preset(args) -> int:
    build = PRESETS[args.name]
    kwargs = {"base_seed": args.base_seed}
    if args.seeds is not None:
        kwargs["n_seeds"] = args.seeds
    root = Path(args.out) if args.out else None
    for cfg in build(**kwargs):
        if args.workers:
            cfg = dataclasses.replace(cfg, workers=args.workers)
        t0 = time.perf_counter()
        out = resolve_output_dir(cfg, None if root is None else root / cfg.name)
        result = run_experiment(cfg, out)
        print(f"{_summary(result)} [{time.perf_counter() - t0:.1f}s] -> {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    H, _ = build_problem(cfg)
    spectrum = diagonalize(H)
    gt = ground_truth(spectrum)
    report = {
        "name": cfg.name,
        "n_qubits": cfg.model.n_qubits,
        "coupling": cfg.model.coupling,
        "field": cfg.model.field,
        "shift": cfg.model.shift,
        "ground_energy": gt.energy,
        "ground_degeneracy": gt.degeneracy,
        "eigenvalues": np.round(spectrum.eigenvalues, 12).tolist(),
    }
    print(json.dumps(report, indent=2))
    return 0


def cmd_check(args) -> int:
    from .checks import run_checks

    failures = 0
    for name, ok, detail in run_checks():
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgfvqe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a TOML config or manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a published experiment family")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out", default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("oracle", help="print the exact spectrum and ground state data")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check", help="run the numerical invariant checks")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except QGFError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
