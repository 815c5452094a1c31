"""CLI command: single-trial convergence dump as JSON lines."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError

from hybridad.cli.common import collect_overrides, console, fail, setup_logging
from hybridad.errors import HybridADError
from hybridad.models.schemas import SolverParams
from hybridad.services.experiments import resolve_config, run_trace
from hybridad.services.reports import write_jsonl


def trace_cmd(
    config: Optional[Path] = typer.Option(None, "--config", help="TOML scenario file"),
    set_: Optional[list[str]] = typer.Option(None, "--set", help="Scenario override field=value (repeatable)"),
    seed: Optional[int] = typer.Option(None, help="Root seed"),
    trial: int = typer.Option(0, help="Trial index (derives the scenario seed)"),
    max_iters: Optional[int] = typer.Option(None, help="Max outer iterations"),
    objective: bool = typer.Option(False, "--objective", help="Record per-AP local objectives (small LK only)"),
    out: Optional[Path] = typer.Option(
        None, "--out", help="JSON-lines file (fronthaul log written next to it as .fronthaul.csv); stdout when omitted"
    ),
) -> None:
    """Run the consensus loop on one trial and dump iteration and sweep records."""
    setup_logging()
    try:
        cfg = resolve_config(collect_overrides(config, set_, seed=seed))
        kwargs = {"track_objective": objective}
        if max_iters is not None:
            kwargs["max_iters"] = max_iters
        fronthaul = out.with_suffix(".fronthaul.csv") if out is not None else None
        records = run_trace(cfg, SolverParams(**kwargs), trial, fronthaul_csv=fronthaul)
    except (HybridADError, ValidationError) as e:
        fail(e)

    if out is None:
        for rec in records:
            typer.echo(json.dumps(rec, sort_keys=True, default=float))
        return
    write_jsonl(records, out)
    console.print(f"[green]✓[/green] wrote {len(records)} records to {out} and the fronthaul log to {fronthaul}")
