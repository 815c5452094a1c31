"""CLI command to list registered experiment runs."""

from __future__ import annotations

import typer
from rich.table import Table

from hybridad.cli.common import console
from hybridad.db.engine import build_engine
from hybridad.db.init_db import ensure_db
from hybridad.repos.runs_repo import RunsRepo


def list_runs_cmd(limit: int = typer.Option(20, help="Most recent runs to show")) -> None:
    """List experiment runs in the registry."""
    engine = build_engine()
    ensure_db(engine)
    runs = RunsRepo(engine).list_runs(limit=limit)

    table = Table(title="Experiment Runs")
    table.add_column("run_id", style="cyan")
    table.add_column("preset", style="magenta")
    table.add_column("status")
    table.add_column("created_at", style="green")
    table.add_column("csv")
    for r in runs:
        table.add_row(
            r.run_id,
            r.preset,
            r.status,
            r.created_at.isoformat() if r.created_at else "",
            r.csv_path or "",
        )
    console.print(table)
