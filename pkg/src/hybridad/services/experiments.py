"""Monte-Carlo campaigns: presets, per-trial runs, EER curves and their outputs."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from pydantic import ValidationError
from sqlalchemy.engine import Engine

from hybridad import __version__
from hybridad.config.settings import settings
from hybridad.db.engine import build_engine
from hybridad.db.init_db import ensure_db
from hybridad.errors import ConfigError
from hybridad.models.domain import ReceivedSignal, Scenario, TrialResult
from hybridad.models.schemas import ALGORITHMS, PRESET_NAMES, ExperimentSpec, ScenarioConfig, SolverParams
from hybridad.repos.runs_repo import CurvePointRow, RunsRepo
from hybridad.services.channel import build_scenario, synthesize_received
from hybridad.services.consensus import history_rows, run_algorithm1, write_fronthaul_csv
from hybridad.services.evaluation import eer_by_iteration, equal_error
from hybridad.services.reports import write_csv, write_json
from hybridad.services.rng import derive_seed, substream
from hybridad.services.scenario import rayleigh_distance
from hybridad.services.solver import centralized_cd

logger = logging.getLogger("hybridad.experiments")

FIG2A_ANTENNAS = (24, 32)
FIG2B_TOTAL_ANTENNAS = 72
FIG2B_AP_COUNTS = tuple(range(1, 13))
LAMBDA_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
FIG3A_DEVICES = (50, 100, 150, 200)
FIG3A_SEQ_LEN = 6
FIG3B_SEQ_LENS = (4, 6, 8, 10, 12)
FIG3B_DEVICES = 100

CSV_FIELDS = [
    "preset",
    "point",
    "algorithm",
    "iteration",
    "n_devices",
    "n_aps",
    "n_antennas",
    "seq_len",
    "lambda_c",
    "rayleigh_m",
    "trials",
    "eer",
    "eer_stderr",
    "gamma_eer",
    "crossed",
    "mean_iterations",
]


@dataclass(frozen=True)
class SweepPoint:
    label: str
    cfg: ScenarioConfig


@dataclass(frozen=True)
class PresetPlan:
    points: tuple[SweepPoint, ...]
    swept: frozenset[str]
    algorithms: tuple[str, ...]
    per_iteration: bool
    skipped: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExperimentOutcome:
    csv_path: Path
    manifest_path: Path
    rows: list[dict]
    run_id: Optional[str] = None
    skipped: tuple[str, ...] = field(default_factory=tuple)


PRESET_SWEPT: dict[str, frozenset[str]] = {
    "fig2a_iterations": frozenset({"n_antennas"}),
    "fig2b_ap_sweep": frozenset({"n_aps", "n_antennas", "ap_positions"}),
    "fig3a_device_sweep": frozenset({"lambda_c", "n_devices", "seq_len"}),
    "fig3b_seqlen_sweep": frozenset({"lambda_c", "seq_len", "n_devices"}),
    "custom": frozenset(),
}


def resolve_config(overrides: Optional[Mapping[str, Any]] = None, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Apply field overrides to a base config, re-validating the result."""
    payload = (base or ScenarioConfig()).model_dump()
    payload.update(dict(overrides or {}))
    try:
        cfg = ScenarioConfig(**payload)
    except ValidationError as e:
        err = e.errors()[0]
        loc = err.get("loc") or ("config",)
        raise ConfigError(f"{loc[0]}: {err.get('msg')}", field=str(loc[0])) from e
    if not 1 <= cfg.n_active < cfg.n_devices:
        raise ConfigError(
            f"active_ratio={cfg.active_ratio} gives {cfg.n_active} active of {cfg.n_devices} devices",
            field="active_ratio",
        )
    return cfg


def _point(label: str, base: ScenarioConfig, **update) -> SweepPoint:
    return SweepPoint(label=label, cfg=resolve_config(update, base))


def build_plan(preset: str, overrides: Optional[Mapping[str, Any]] = None) -> PresetPlan:
    if preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESET_NAMES)}", field="preset")
    overrides = dict(overrides or {})
    for key in overrides:
        if key in PRESET_SWEPT[preset]:
            raise ConfigError(f"{key} is swept by preset {preset} and cannot be overridden", field=key)
    base = resolve_config(overrides)

    if preset == "fig2a_iterations":
        points = tuple(_point(f"K={K}", base, n_antennas=K) for K in FIG2A_ANTENNAS)
        return PresetPlan(points, PRESET_SWEPT[preset], ("distributed", "centralized"), True)

    if preset == "fig2b_ap_sweep":
        points, skipped = [], []
        for M in FIG2B_AP_COUNTS:
            if FIG2B_TOTAL_ANTENNAS % M:
                skipped.append(f"M={M}")
                logger.info("preset=%s skip M=%d (does not divide %d antennas)", preset, M, FIG2B_TOTAL_ANTENNAS)
                continue
            K = FIG2B_TOTAL_ANTENNAS // M
            points.append(_point(f"M={M},K={K}", base, n_aps=M, n_antennas=K, ap_positions=None))
        return PresetPlan(tuple(points), PRESET_SWEPT[preset], ("distributed",), False, tuple(skipped))

    if preset == "fig3a_device_sweep":
        points = tuple(
            _point(f"lambda_c={lam:g},N={N}", base, lambda_c=lam, n_devices=N, seq_len=FIG3A_SEQ_LEN)
            for lam in LAMBDA_GRID
            for N in FIG3A_DEVICES
        )
        return PresetPlan(points, PRESET_SWEPT[preset], ("distributed",), False)

    if preset == "fig3b_seqlen_sweep":
        points = tuple(
            _point(f"lambda_c={lam:g},L={L}", base, lambda_c=lam, seq_len=L, n_devices=FIG3B_DEVICES)
            for lam in LAMBDA_GRID
            for L in FIG3B_SEQ_LENS
        )
        return PresetPlan(points, PRESET_SWEPT[preset], ("distributed",), False)

    return PresetPlan((SweepPoint("custom", base),), PRESET_SWEPT[preset], ("distributed",), False)


def draw_trial(cfg: ScenarioConfig, index: int) -> tuple[Scenario, list[ReceivedSignal]]:
    """Scenario and received signals of trial `index`, seeded from derive_seed(cfg.seed, "trial", index)."""
    seed = derive_seed(cfg.seed, "trial", index)
    scenario = build_scenario(cfg.model_copy(update={"seed": seed}))
    y_all = synthesize_received(
        scenario, scenario.truth, substream(seed, "channels"), noise_rng=substream(seed, "noise")
    )
    return scenario, list(y_all)


def run_trial(
    cfg: ScenarioConfig,
    params: SolverParams,
    index: int,
    algorithms: Sequence[str] = ("distributed",),
) -> dict[str, TrialResult]:
    """
    One coherence block: a fresh scenario and one channel/noise draw (see
    draw_trial), then each requested algorithm on the same received signal.
    """
    scenario, y_all = draw_trial(cfg, index)
    out: dict[str, TrialResult] = {}
    for alg in algorithms:
        t0 = time.perf_counter()
        if alg == "distributed":
            res = run_algorithm1(scenario, y_all, params)
            out[alg] = TrialResult(
                a_cont=res.a,
                truth=scenario.truth,
                iterations_used=res.iterations,
                wall_time=time.perf_counter() - t0,
                history=tuple(rec.a for rec in res.history),
            )
        elif alg == "centralized":
            cres = centralized_cd(y_all, scenario, params)
            out[alg] = TrialResult(
                a_cont=cres.a,
                truth=scenario.truth,
                iterations_used=cres.sweeps,
                wall_time=time.perf_counter() - t0,
                history=cres.history,
            )
        else:
            raise ConfigError(f"unknown algorithm {alg!r}", field="algorithms")
    return out


def _trial_job(job: tuple[ScenarioConfig, SolverParams, int, tuple[str, ...]]) -> dict[str, TrialResult]:
    cfg, params, index, algorithms = job
    return run_trial(cfg, params, index, algorithms)


def run_point(
    cfg: ScenarioConfig,
    params: SolverParams,
    trials: int,
    algorithms: Sequence[str],
    pool: Optional[Executor] = None,
) -> dict[str, list[TrialResult]]:
    """All trials of one sweep point, merged in trial-index order."""
    jobs = [(cfg, params, i, tuple(algorithms)) for i in range(trials)]
    results = list(pool.map(_trial_job, jobs)) if pool is not None else [_trial_job(j) for j in jobs]
    return {alg: [r[alg] for r in results] for alg in algorithms}


def _rows_for(preset: str, point: SweepPoint, alg: str, trials: list[TrialResult], per_iteration: bool) -> list[dict]:
    cfg = point.cfg
    common = {
        "preset": preset,
        "point": point.label,
        "algorithm": alg,
        "n_devices": cfg.n_devices,
        "n_aps": cfg.n_aps,
        "n_antennas": cfg.n_antennas,
        "seq_len": cfg.seq_len,
        "lambda_c": cfg.lambda_c,
        "rayleigh_m": rayleigh_distance(cfg.n_antennas, cfg.lambda_c),
        "trials": len(trials),
        "mean_iterations": float(np.mean([t.iterations_used for t in trials])),
    }
    rows = []
    if per_iteration:
        for i, curve in enumerate(eer_by_iteration(trials), start=1):
            rows.append(
                {
                    **common,
                    "iteration": i,
                    "eer": curve.eer,
                    "eer_stderr": curve.eer_stderr,
                    "gamma_eer": curve.gamma_eer,
                    "crossed": int(curve.crossed),
                }
            )
    final = equal_error(trials)
    rows.append(
        {
            **common,
            "iteration": "final",
            "eer": final.eer,
            "eer_stderr": final.eer_stderr,
            "gamma_eer": final.gamma_eer,
            "crossed": int(final.crossed),
        }
    )
    return rows


def _manifest(preset: str, spec: ExperimentSpec, plan: PresetPlan, csv_name: str) -> dict:
    return {
        "preset": preset,
        "version": __version__,
        "seed": spec.base.seed,
        "trials": spec.trials,
        "workers": spec.workers,
        "algorithms": list(spec.algorithms),
        "per_iteration": spec.per_iteration,
        "base_config": spec.base.model_dump(mode="json"),
        "solver": spec.solver.model_dump(mode="json"),
        "points": [
            {
                "label": p.label,
                "config": p.cfg.model_dump(mode="json"),
                "rayleigh_distance_m": rayleigh_distance(p.cfg.n_antennas, p.cfg.lambda_c),
            }
            for p in plan.points
        ],
        "rayleigh_distances_m": sorted(
            {round(rayleigh_distance(p.cfg.n_antennas, p.cfg.lambda_c), 6) for p in plan.points}
        ),
        "skipped": list(plan.skipped),
        "csv": csv_name,
    }


def run_experiment(
    preset: str,
    overrides: Optional[Mapping[str, Any]] = None,
    out_path: Optional[str | Path] = None,
    *,
    trials: Optional[int] = None,
    workers: Optional[int] = None,
    solver: Optional[SolverParams] = None,
    algorithms: Optional[Sequence[str]] = None,
    record: Optional[bool] = None,
    engine: Optional[Engine] = None,
) -> ExperimentOutcome:
    """
    Run a preset campaign and write <out>/<preset>.csv plus <out>/<preset>_manifest.json.

    The CSV carries no timing columns, so identical inputs give byte-identical files
    whatever the worker count.
    """
    plan = build_plan(preset, overrides)
    algs = tuple(algorithms) if algorithms is not None else plan.algorithms
    for alg in algs:
        if alg not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {alg!r}", field="algorithms")
    spec_kwargs: dict[str, Any] = {
        "preset": preset,
        "base": resolve_config(overrides),
        "algorithms": algs,
        "per_iteration": plan.per_iteration,
    }
    if solver is not None:
        spec_kwargs["solver"] = solver
    if trials is not None:
        spec_kwargs["trials"] = trials
    if workers is not None:
        spec_kwargs["workers"] = workers
    try:
        spec = ExperimentSpec(**spec_kwargs)
    except ValidationError as e:
        loc = e.errors()[0].get("loc") or ("spec",)
        raise ConfigError(str(e.errors()[0].get("msg")), field=str(loc[0])) from e

    out_dir = Path(out_path) if out_path is not None else Path(settings.reports_dir) / preset
    csv_path = out_dir / f"{preset}.csv"
    manifest_path = out_dir / f"{preset}_manifest.json"
    manifest = _manifest(preset, spec, plan, csv_path.name)

    record = settings.record_runs if record is None else record
    repo = None
    run_id = None
    if record:
        engine = engine or build_engine()
        ensure_db(engine)
        repo = RunsRepo(engine)
        run_id = repo.create_run(preset, json.dumps(manifest, sort_keys=True))

    logger.info(
        "preset=%s points=%d trials=%d workers=%d algorithms=%s",
        preset,
        len(plan.points),
        spec.trials,
        spec.workers,
        ",".join(algs),
    )
    rows: list[dict] = []
    pool = ProcessPoolExecutor(max_workers=spec.workers) if spec.workers > 1 else None
    try:
        for point in plan.points:
            results = run_point(point.cfg, spec.solver, spec.trials, algs, pool)
            for alg in algs:
                point_rows = _rows_for(preset, point, alg, results[alg], spec.per_iteration)
                rows.extend(point_rows)
                logger.info("preset=%s point=%s algorithm=%s eer=%.4f", preset, point.label, alg, point_rows[-1]["eer"])
    except Exception as e:
        if repo is not None and run_id is not None:
            repo.mark_failed(run_id, f"{type(e).__name__}: {e}")
        raise
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    write_csv(rows, CSV_FIELDS, csv_path)
    write_json(manifest, manifest_path)

    if repo is not None and run_id is not None:
        repo.add_points(
            run_id,
            [
                CurvePointRow(
                    point_label=r["point"],
                    algorithm=r["algorithm"],
                    iteration=None if r["iteration"] == "final" else int(r["iteration"]),
                    eer=float(r["eer"]),
                    eer_stderr=float(r["eer_stderr"]),
                    gamma_eer=float(r["gamma_eer"]),
                    trials=int(r["trials"]),
                )
                for r in rows
            ],
        )
        repo.mark_completed(run_id, str(csv_path))

    return ExperimentOutcome(csv_path, manifest_path, rows, run_id, plan.skipped)


def run_trace(
    cfg: ScenarioConfig,
    params: SolverParams,
    index: int = 0,
    fronthaul_csv: Optional[str | Path] = None,
) -> list[dict]:
    """
    Single-trial convergence dump: one record per outer iteration followed by the
    per-AP sweep records (omega, exact objective change, max |d|). The fronthaul
    message log goes to `fronthaul_csv` when given.
    """
    scenario, y_all = draw_trial(cfg, index)
    res = run_algorithm1(scenario, y_all, params)
    if fronthaul_csv is not None:
        write_fronthaul_csv(res.fronthaul, fronthaul_csv)
    out: list[dict] = [{"kind": "iteration", **row} for row in history_rows(res.history)]
    for state in res.states:
        for rec in state.trace:
            out.append(
                {
                    "kind": "sweep",
                    "ap": state.ap_index,
                    "sweep": rec.sweep,
                    "omega": rec.omega,
                    "objective_change": rec.objective_change,
                    "max_step": rec.max_step,
                    "accepted_steps": rec.accepted_steps,
                    "retries": rec.retries,
                }
            )
    return out
