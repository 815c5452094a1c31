from __future__ import annotations

import json

from typer.testing import CliRunner

from hybridad.cli.app import app
from hybridad.services.reports import read_csv

TINY_ARGS = [
    "--set", "n_devices=10",
    "--set", "n_aps=2",
    "--set", "n_antennas=4",
    "--set", "seq_len=3",
    "--set", "n_scatterers=2",
    "--set", "active_ratio=0.2",
]


def _json_lines(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.startswith("{")]


def test_run_custom_writes_outputs(tmp_path) -> None:
    runner = CliRunner()
    res = runner.invoke(
        app,
        ["run", "--preset", "custom", *TINY_ARGS, "--n-devices", "12", "--trials", "2", "--max-iters", "2", "--seed", "5", "--out", str(tmp_path)],
    )
    assert res.exit_code == 0, res.output
    rows = read_csv(tmp_path / "custom.csv")
    assert rows[0]["preset"] == "custom"
    manifest = json.loads((tmp_path / "custom_manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 5
    assert manifest["solver"]["max_iters"] == 2
    assert manifest["base_config"]["n_devices"] == 12


def test_bad_override_exits_with_error_record(tmp_path) -> None:
    runner = CliRunner()
    res = runner.invoke(app, ["run", "--preset", "custom", "--set", "n_devices", "--out", str(tmp_path)])
    assert res.exit_code == 1
    assert '"error": "ConfigError"' in res.output


def test_swept_override_is_refused(tmp_path) -> None:
    runner = CliRunner()
    res = runner.invoke(app, ["run", "--preset", "fig2b_ap_sweep", "--n-aps", "4", "--out", str(tmp_path)])
    assert res.exit_code == 1
    assert '"field": "n_aps"' in res.output


def test_config_file_is_read(tmp_path) -> None:
    cfg = tmp_path / "scenario.toml"
    cfg.write_text("[scenario]\nn_devices = 12\nn_aps = 1\nap_positions = [[0.0, 0.0]]\n", encoding="utf-8")
    runner = CliRunner()
    res = runner.invoke(app, ["dump-scenario", "--config", str(cfg)])
    assert res.exit_code == 0, res.output
    summary, _ = json.JSONDecoder().raw_decode(res.stdout[res.stdout.index("{"):])
    assert summary["config"]["n_devices"] == 12
    assert summary["ap_positions"] == [[0.0, 0.0]]


def test_dump_scenario_with_channels(tmp_path) -> None:
    runner = CliRunner()
    out = tmp_path / "channels.json"
    res = runner.invoke(app, ["dump-scenario", *TINY_ARGS, "--seed", "1", "--channels", str(out)])
    assert res.exit_code == 0, res.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["shape"] == [2, 10, 4]


def test_analyze_writes_pair_report(tmp_path) -> None:
    runner = CliRunner()
    res = runner.invoke(
        app,
        ["analyze", "--pairs", "50", "--nullspace", *TINY_ARGS[:2], *TINY_ARGS[4:], "--set", "n_aps=1", "--set", "ap_positions=[[0,0]]", "--out", str(tmp_path)],
    )
    assert res.exit_code == 0, res.output
    assert len(read_csv(tmp_path / "pairs.csv")) == 50
    summary = json.loads((tmp_path / "analysis_summary.json").read_text(encoding="utf-8"))
    assert summary["pair_similarity"]["violations"] == 0
    assert summary["nullspace"]["shape"] == [2 * 144, 10]


def test_trace_prints_json_lines() -> None:
    runner = CliRunner()
    res = runner.invoke(app, ["trace", *TINY_ARGS, "--max-iters", "2", "--objective"])
    assert res.exit_code == 0, res.output
    records = _json_lines(res.stdout)
    assert records[0]["kind"] == "iteration"
    assert len(records[0]["local_objectives"]) == 2
    assert any(r["kind"] == "sweep" for r in records)


def test_trace_to_file(tmp_path) -> None:
    runner = CliRunner()
    out = tmp_path / "trace.jsonl"
    res = runner.invoke(app, ["trace", *TINY_ARGS, "--max-iters", "1", "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0])["kind"] == "iteration"
    fronthaul = read_csv(tmp_path / "trace.fronthaul.csv")
    assert [r["direction"] for r in fronthaul] == ["down", "up", "up"]
    assert {r["payload_len"] for r in fronthaul} == {"10"}


def test_init_db_then_list_runs(tmp_path) -> None:
    runner = CliRunner()
    res = runner.invoke(app, ["init-db"])
    assert res.exit_code == 0, res.output
    assert "Run registry initialized" in res.stdout

    res = runner.invoke(app, ["list-runs", "--limit", "5"])
    assert res.exit_code == 0, res.output
    assert "Experiment Runs" in res.stdout
