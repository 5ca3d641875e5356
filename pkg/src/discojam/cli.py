"""Experiment runner: config loading, sweeps, CSV and manifest emission.

Every experiment is a one-dimensional sweep of the base scene. All
scenarios at all grid points share one run seed, so curves are paired
(same channel draws wherever shapes agree) and a rerun with the same
config and seed reproduces the CSV body byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundInput, lower_bound_mrc, lower_bound_zf
from .errors import ConfigError
from .rate import SCENARIOS, ergodic
from .scene import SceneConfig, large_scale, place_users, rng_stream

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "EXPERIMENTS",
    "validate_and_load",
    "run_experiment",
    "write_outputs",
    "main",
]

SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "experiment", "sweep_var", "sweep_value", "scenario", "user",
    "mean_rate_bps_hz", "ci_half", "bound_bps_hz", "trials", "seed",
]

BOUND_TOKENS = ("prop2", "prop3", "nojam_zf_bound", "nojam_mrc_bound")

# Which bound curve annotates which scenario's rows.
_SCENARIO_BOUND = {
    "dirs_mrc": "prop2",
    "dirs_zf": "prop3",
    "nojam_zf": "nojam_zf_bound",
    "nojam_mrc": "nojam_mrc_bound",
}

DEFAULT_SCENARIOS = ("nojam_zf", "nojam_mrc", "dirs_zf", "dirs_mrc")
DEFAULT_BOUNDS = BOUND_TOKENS


def _apply_field(field):
    def apply(cfg, value):
        return cfg.replace(**{field: value})

    return apply


def _apply_dbd(cfg, value):
    if value <= 0:
        raise ConfigError(f"reflector offset must be positive, got {value}")
    bx, by, bz = cfg.bs_position
    return cfg.replace(dirs_position=(bx - float(value), by, bz))


def _apply_nt_nd_locked(cfg, value):
    return cfg.replace(n_antennas=int(value), n_dirs_elements=16 * int(value))


@dataclass(frozen=True)
class _Experiment:
    sweep_var: str
    default_grid: tuple
    integer: bool
    apply: callable


EXPERIMENTS = {
    "power_sweep": _Experiment(
        "p_d_dbm", tuple(float(v) for v in range(-20, 11)), False,
        _apply_field("p_d_dbm")),
    "nd_sweep": _Experiment(
        "n_dirs_elements", (256, 512, 1024, 2048, 4096), True,
        _apply_field("n_dirs_elements")),
    "bits_sweep": _Experiment(
        "phase_bits", (1, 2, 3), True, _apply_field("phase_bits")),
    "dbd_sweep": _Experiment(
        "bs_dirs_distance_m", (2.0, 4.0, 8.0, 16.0, 32.0), False, _apply_dbd),
    "nt_sweep": _Experiment(
        "n_antennas", (32, 64, 128, 256), True, _apply_field("n_antennas")),
    "nt_nd_locked_sweep": _Experiment(
        "n_antennas", (64, 128, 256), True, _apply_nt_nd_locked),
    "k_sweep": _Experiment(
        "n_users", (2, 4, 8, 12, 16), True, _apply_field("n_users")),
}


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    grid: tuple
    scenarios: tuple
    bounds: tuple
    scene: SceneConfig
    trials: int
    seed: int
    workers: int = 1


@dataclass
class ResultRow:
    experiment: str
    sweep_var: str
    sweep_value: float
    scenario: str
    user: str
    mean_rate_bps_hz: float
    ci_half: float
    bound_bps_hz: float | None
    trials: int
    seed: int


_TOP_KEYS = {"experiment", "grid", "scenarios", "bounds", "trials", "seed",
             "workers", "scene"}


def _build_spec(raw: dict, experiment: str | None = None,
                trials: int | None = None, seed: int | None = None) -> ExperimentSpec:
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    exp_id = experiment or raw.get("experiment", "power_sweep")
    if exp_id not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {exp_id!r}; known: {', '.join(sorted(EXPERIMENTS))}"
        )
    exp = EXPERIMENTS[exp_id]

    scene = SceneConfig.from_dict(raw.get("scene", {}))

    grid_raw = raw.get("grid", list(exp.default_grid))
    if not isinstance(grid_raw, list) or len(grid_raw) == 0:
        raise ConfigError("grid must be a non-empty list of sweep values")
    try:
        grid = [int(v) if exp.integer else float(v) for v in grid_raw]
        if exp.integer and any(float(g) != float(v) for g, v in zip(grid, grid_raw)):
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError(
            f"grid values for {exp_id} must be "
            f"{'integers' if exp.integer else 'numbers'}, got {grid_raw!r}"
        ) from None
    grid = tuple(sorted(set(grid)))
    for v in grid:
        try:
            exp.apply(scene, v)  # surface bad sweep values at load time
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid {exp.sweep_var} value {v!r}: {exc}") from None

    scenarios = tuple(raw.get("scenarios", DEFAULT_SCENARIOS))
    for s in scenarios:
        if s not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {s!r}; known: {', '.join(sorted(SCENARIOS))}"
            )
        if SCENARIOS[s].jammer == "aj" and scene.aj_position is None:
            raise ConfigError(
                f"scenario {s!r} needs aj_position in the scene config"
            )
    if len(scenarios) == 0:
        raise ConfigError("scenarios must not be empty")

    bound_set = tuple(raw.get("bounds", DEFAULT_BOUNDS))
    for b in bound_set:
        if b not in BOUND_TOKENS:
            raise ConfigError(
                f"unknown bound {b!r}; known: {', '.join(BOUND_TOKENS)}"
            )

    trials_val = trials if trials is not None else raw.get("trials", scene.trials)
    seed_val = seed if seed is not None else raw.get("seed", scene.seed)
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    if not isinstance(trials_val, int) or trials_val < 2:
        raise ConfigError(f"trials must be an integer >= 2, got {trials_val!r}")

    return ExperimentSpec(
        experiment=exp_id, grid=grid, scenarios=scenarios, bounds=bound_set,
        scene=scene, trials=int(trials_val), seed=int(seed_val), workers=workers,
    )


def validate_and_load(path, experiment: str | None = None,
                      trials: int | None = None,
                      seed: int | None = None) -> ExperimentSpec:
    """Parse and validate a JSON experiment config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return _build_spec(raw, experiment=experiment, trials=trials, seed=seed)


def _bound_value(spec: ExperimentSpec, cfg: SceneConfig, gains, scenario: str,
                 user: int) -> float | None:
    token = _SCENARIO_BOUND.get(scenario)
    if token is None or token not in spec.bounds:
        return None
    bi = BoundInput.from_scene(cfg, gains, user)
    if token == "prop2":
        return lower_bound_mrc(bi)
    if token == "prop3":
        return lower_bound_zf(bi)
    nojam = dataclasses.replace(bi, n_dirs_elements=0)
    if token == "nojam_zf_bound":
        return lower_bound_zf(nojam)
    return lower_bound_mrc(nojam)


def run_experiment(spec: ExperimentSpec, progress=None) -> tuple[list, list]:
    """Evaluate the sweep; returns (rows, error_records).

    A numerical failure in one (grid point, scenario) cell is recorded
    and skipped so the rest of the sweep still comes out; the CLI turns a
    non-empty error list into a nonzero exit code.
    """
    exp = EXPERIMENTS[spec.experiment]
    rows: list[ResultRow] = []
    errors: list[dict] = []

    for value in spec.grid:
        cfg = exp.apply(spec.scene, value)
        users = place_users(cfg, rng_stream(spec.seed, 0))
        gains = large_scale(cfg, users)
        for scenario in spec.scenarios:
            if progress:
                progress(f"{spec.experiment} {exp.sweep_var}={value} {scenario}")
            try:
                est = ergodic(cfg, scenario, trials=spec.trials, seed=spec.seed,
                              workers=spec.workers)
            except (ArithmeticError, RuntimeError, FloatingPointError) as exc:
                errors.append({
                    "sweep_value": value, "scenario": scenario, "error": str(exc),
                })
                continue
            per_user_bounds = []
            for k in range(cfg.n_users):
                bound = _bound_value(spec, cfg, gains, scenario, k)
                per_user_bounds.append(bound)
                rows.append(ResultRow(
                    experiment=spec.experiment, sweep_var=exp.sweep_var,
                    sweep_value=float(value), scenario=scenario, user=str(k),
                    mean_rate_bps_hz=float(est.mean_rate[k]),
                    ci_half=float(est.ci_half[k]),
                    bound_bps_hz=bound, trials=est.trials, seed=spec.seed,
                ))
            if all(b is not None for b in per_user_bounds):
                avg_bound = float(np.mean(per_user_bounds))
            else:
                avg_bound = None
            rows.append(ResultRow(
                experiment=spec.experiment, sweep_var=exp.sweep_var,
                sweep_value=float(value), scenario=scenario, user="avg",
                mean_rate_bps_hz=est.sum_rate_mean / cfg.n_users,
                ci_half=est.sum_rate_ci_half / cfg.n_users,
                bound_bps_hz=avg_bound, trials=est.trials, seed=spec.seed,
            ))

    rows.sort(key=_row_order)
    return rows, errors


def _row_order(row: ResultRow):
    user_key = (1, 0) if row.user == "avg" else (0, int(row.user))
    return (row.sweep_value, row.scenario, user_key)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_outputs(spec: ExperimentSpec, rows: list, errors: list,
                  out_dir) -> Path:
    """Write <experiment>.csv and manifest.json; returns the CSV path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat()

    csv_path = out / f"{spec.experiment}.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(f"# discojam schema={SCHEMA_VERSION} generated={stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                row.experiment, row.sweep_var, _fmt(row.sweep_value),
                row.scenario, row.user, _fmt(row.mean_rate_bps_hz),
                _fmt(row.ci_half), _fmt(row.bound_bps_hz), row.trials, row.seed,
            ])

    manifest = {
        "schema": SCHEMA_VERSION,
        "generated": stamp,
        "version": __version__,
        "experiment": spec.experiment,
        "csv": csv_path.name,
        "grid": list(spec.grid),
        "scenarios": list(spec.scenarios),
        "bounds": list(spec.bounds),
        "trials": spec.trials,
        "seed": spec.seed,
        "workers": spec.workers,
        "scene": spec.scene.to_dict(),
        "errors": errors,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="discojam",
        description="Monte Carlo sweeps of reflector-jammed uplink rates",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment sweep")
    run_p.add_argument("--config", required=True, help="JSON experiment config")
    run_p.add_argument("--experiment", default=None,
                       help="experiment id (overrides config)")
    run_p.add_argument("--trials", type=int, default=None,
                       help="Monte Carlo trials per point (overrides config)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="run seed (overrides config)")
    run_p.add_argument("--out", default=".", help="output directory")
    run_p.add_argument("--quiet", action="store_true",
                       help="suppress progress lines")
    args = parser.parse_args(argv)

    try:
        spec = validate_and_load(args.config, experiment=args.experiment,
                                 trials=args.trials, seed=args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    progress = None if args.quiet else (
        lambda msg: print(msg, file=sys.stderr, flush=True))
    rows, errors = run_experiment(spec, progress=progress)
    csv_path = write_outputs(spec, rows, errors, args.out)
    print(csv_path)
    for err in errors:
        print(
            f"error: {err['scenario']} at {err['sweep_value']}: {err['error']}",
            file=sys.stderr,
        )
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
