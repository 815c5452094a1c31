"""CLI command for the identifiability reports."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
from rich.table import Table

from hybridad.cli.common import collect_overrides, console, fail, setup_logging
from hybridad.errors import HybridADError
from hybridad.services.analysis import PAIR_FIELDS, nullspace_probe, pair_rows, proposition1_sweep
from hybridad.services.channel import build_scenario
from hybridad.services.experiments import resolve_config
from hybridad.services.reports import write_csv, write_json


def analyze_cmd(
    pairs: int = typer.Option(1000, "--pairs", help="Random device pairs for the similarity bound check"),
    nullspace: bool = typer.Option(False, "--nullspace", help="Also probe the null space of the stacked Psi (small scale)"),
    config: Optional[Path] = typer.Option(None, "--config", help="TOML scenario file"),
    set_: Optional[list[str]] = typer.Option(None, "--set", help="Scenario override field=value (repeatable)"),
    seed: Optional[int] = typer.Option(None, help="Scenario seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory for pairs CSV and summary JSON"),
) -> None:
    """Pairwise column similarities vs. the signature bound, and optional null-space probe."""
    setup_logging()
    try:
        cfg = resolve_config(collect_overrides(config, set_, seed=seed))
        scenario = build_scenario(cfg)
        report = proposition1_sweep(scenario, pairs, strict=False)
        summary = {"config": cfg.model_dump(mode="json"), "pair_similarity": report.to_dict()}
        if nullspace:
            summary["nullspace"] = nullspace_probe(scenario).to_dict()
    except (HybridADError, ValidationError) as e:
        fail(e)

    table = Table(title=f"Pair similarity ({len(report.rows)} pairs, {report.violations} violations)")
    table.add_column("pair type", style="cyan")
    table.add_column("count", justify="right")
    table.add_column("mean", justify="right", style="green")
    table.add_column("max", justify="right")
    table.add_column("mean sim/bound", justify="right", style="magenta")
    for s in report.summary:
        table.add_row(s.pair_type, str(s.count), f"{s.mean_similarity:.4f}", f"{s.max_similarity:.4f}", f"{s.mean_ratio:.4f}")
    console.print(table)
    if nullspace:
        ns = summary["nullspace"]
        console.print(
            f"null_dim={ns['null_dim']} sigma_min={ns['sigma_min']:.3e} sign_feasible={ns['sign_feasible']}"
        )

    if out is not None:
        write_csv(pair_rows(report), PAIR_FIELDS, out / "pairs.csv")
        write_json(summary, out / "analysis_summary.json")
        console.print(f"[green]✓[/green] wrote {out / 'pairs.csv'} and {out / 'analysis_summary.json'}")
    if report.violations:
        raise typer.Exit(1)
