from __future__ import annotations

import json

import numpy as np
import pytest

from hybridad.db.engine import build_engine
from hybridad.errors import ConfigError
from hybridad.models.schemas import ExperimentSpec, SolverParams
from hybridad.repos.runs_repo import RunsRepo
from hybridad.services import experiments
from hybridad.services.experiments import (
    CSV_FIELDS,
    build_plan,
    resolve_config,
    run_experiment,
    run_trace,
    run_trial,
)
from hybridad.services.reports import read_csv

TINY = {
    "n_devices": 10,
    "n_aps": 2,
    "n_antennas": 4,
    "seq_len": 3,
    "n_scatterers": 2,
    "active_ratio": 0.2,
    "seed": 3,
}
FAST = SolverParams(max_iters=3, centralized_max_sweeps=3)


def test_resolve_config_maps_validation_to_config_error() -> None:
    with pytest.raises(ConfigError) as exc:
        resolve_config({"n_devices": 0})
    assert exc.value.field == "n_devices"
    with pytest.raises(ConfigError) as exc:
        resolve_config({"no_such_field": 1})
    assert exc.value.field == "no_such_field"


def test_resolve_config_needs_both_classes() -> None:
    with pytest.raises(ConfigError) as exc:
        resolve_config({"n_devices": 4, "active_ratio": 0.05})
    assert exc.value.field == "active_ratio"


def test_unknown_preset() -> None:
    with pytest.raises(ConfigError) as exc:
        build_plan("fig9_nope")
    assert exc.value.field == "preset"


def test_swept_field_cannot_be_overridden() -> None:
    with pytest.raises(ConfigError) as exc:
        build_plan("fig2b_ap_sweep", {"n_aps": 4})
    assert exc.value.field == "n_aps"
    with pytest.raises(ConfigError):
        build_plan("fig3b_seqlen_sweep", {"seq_len": 8})


def test_ap_sweep_plan_keeps_only_divisors() -> None:
    plan = build_plan("fig2b_ap_sweep")
    assert [p.cfg.n_aps for p in plan.points] == [1, 2, 3, 4, 6, 8, 9, 12]
    assert all(p.cfg.n_aps * p.cfg.n_antennas == 72 for p in plan.points)
    assert plan.skipped == ("M=5", "M=7", "M=10", "M=11")


def test_iteration_plan_compares_both_algorithms() -> None:
    plan = build_plan("fig2a_iterations")
    assert [p.cfg.n_antennas for p in plan.points] == [24, 32]
    assert plan.algorithms == ("distributed", "centralized")
    assert plan.per_iteration


def test_wavelength_sweeps_cover_the_rayleigh_grid() -> None:
    plan = build_plan("fig3a_device_sweep")
    assert len(plan.points) == 6 * 4
    assert {p.cfg.seq_len for p in plan.points} == {6}

    manifest = experiments._manifest("fig3a_device_sweep", _spec("fig3a_device_sweep"), plan, "x.csv")
    assert manifest["rayleigh_distances_m"] == pytest.approx([13.225, 26.45, 39.675, 52.9, 66.125, 79.35])

    plan_b = build_plan("fig3b_seqlen_sweep")
    assert {p.cfg.seq_len for p in plan_b.points} == {4, 6, 8, 10, 12}
    assert {p.cfg.n_devices for p in plan_b.points} == {100}


def _spec(preset: str) -> ExperimentSpec:
    return ExperimentSpec(preset=preset, trials=1)


def test_trial_is_deterministic_and_shares_the_received_signal() -> None:
    cfg = resolve_config(TINY)
    r1 = run_trial(cfg, FAST, 0, ("distributed", "centralized"))
    r2 = run_trial(cfg, FAST, 0, ("distributed", "centralized"))
    for alg in ("distributed", "centralized"):
        np.testing.assert_array_equal(r1[alg].a_cont, r2[alg].a_cont)
        assert np.all((r1[alg].a_cont >= 0) & (r1[alg].a_cont <= 1))
    np.testing.assert_array_equal(r1["distributed"].truth, r1["centralized"].truth)
    assert r1["distributed"].iterations_used <= 3


def test_trials_redraw_the_scenario() -> None:
    cfg = resolve_config({**TINY, "n_devices": 30})
    t0 = run_trial(cfg, FAST, 0)["distributed"]
    t1 = run_trial(cfg, FAST, 1)["distributed"]
    assert not np.array_equal(t0.truth, t1.truth)


def test_custom_run_writes_csv_and_manifest(tmp_path) -> None:
    outcome = run_experiment(
        "custom", TINY, tmp_path / "out", trials=3, workers=1, solver=FAST, algorithms=("distributed", "centralized")
    )
    assert outcome.csv_path == tmp_path / "out" / "custom.csv"
    assert outcome.run_id is None
    rows = read_csv(outcome.csv_path)
    assert list(rows[0]) == CSV_FIELDS
    assert [(r["algorithm"], r["iteration"]) for r in rows] == [("distributed", "final"), ("centralized", "final")]
    for r in rows:
        assert 0.0 <= float(r["eer"]) <= 1.0
        assert r["trials"] == "3"

    manifest = json.loads(outcome.manifest_path.read_text(encoding="utf-8"))
    assert manifest["seed"] == 3
    assert manifest["trials"] == 3
    assert manifest["csv"] == "custom.csv"
    assert manifest["points"][0]["config"]["n_devices"] == 10


def test_reruns_are_byte_identical(tmp_path) -> None:
    a = run_experiment("custom", TINY, tmp_path / "a", trials=3, workers=1, solver=FAST)
    b = run_experiment("custom", TINY, tmp_path / "b", trials=3, workers=1, solver=FAST)
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()


def test_worker_count_does_not_change_results(tmp_path) -> None:
    serial = run_experiment("custom", TINY, tmp_path / "w1", trials=4, workers=1, solver=FAST)
    pooled = run_experiment("custom", TINY, tmp_path / "w2", trials=4, workers=2, solver=FAST)
    assert serial.csv_path.read_bytes() == pooled.csv_path.read_bytes()


def test_per_iteration_rows_precede_final() -> None:
    plan_rows = experiments._rows_for(
        "custom",
        build_plan("custom", TINY).points[0],
        "distributed",
        experiments.run_point(resolve_config(TINY), FAST, 2, ("distributed",))["distributed"],
        per_iteration=True,
    )
    iters = [r["iteration"] for r in plan_rows]
    assert iters[-1] == "final"
    assert iters[:-1] == list(range(1, len(iters)))


def test_unknown_algorithm_is_rejected(tmp_path) -> None:
    with pytest.raises(ConfigError) as exc:
        run_experiment("custom", TINY, tmp_path, trials=1, algorithms=("admm",))
    assert exc.value.field == "algorithms"


def test_registry_records_completed_run(tmp_path) -> None:
    engine = build_engine(f"duckdb:///{tmp_path / 'reg.duckdb'}")
    outcome = run_experiment("custom", TINY, tmp_path / "out", trials=2, solver=FAST, record=True, engine=engine)
    repo = RunsRepo(engine)
    row = repo.get_run(outcome.run_id)
    assert row.status == "completed"
    assert row.csv_path == str(outcome.csv_path)
    assert json.loads(row.manifest_json)["preset"] == "custom"
    points = repo.get_points(outcome.run_id)
    assert len(points) == len(outcome.rows)
    assert points[0].iteration is None


def test_registry_marks_failed_run(tmp_path, monkeypatch) -> None:
    engine = build_engine(f"duckdb:///{tmp_path / 'reg.duckdb'}")

    def boom(*args, **kwargs):
        raise RuntimeError("trial exploded")

    monkeypatch.setattr(experiments, "run_point", boom)
    with pytest.raises(RuntimeError):
        run_experiment("custom", TINY, tmp_path / "out", trials=1, record=True, engine=engine)
    runs = RunsRepo(engine).list_runs(limit=1)
    assert runs[0].status == "failed"
    assert "trial exploded" in runs[0].error_text
    assert not (tmp_path / "out" / "custom.csv").exists()


def test_trace_has_iteration_and_sweep_records() -> None:
    records = run_trace(resolve_config(TINY), SolverParams(max_iters=2, tol_a=1e-12))
    kinds = [r["kind"] for r in records]
    assert kinds[0] == "iteration"
    assert 1 <= kinds.count("iteration") <= 2
    sweeps = [r for r in records if r["kind"] == "sweep"]
    assert {r["ap"] for r in sweeps} == {0, 1}
    assert all(r["objective_change"] <= SolverParams().descent_tol for r in sweeps)
    assert all(r["omega"] >= 0 for r in sweeps)
