"""CLI command for Monte-Carlo preset campaigns."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
from rich.table import Table

from hybridad.cli.common import collect_overrides, console, fail, setup_logging
from hybridad.errors import HybridADError
from hybridad.models.schemas import SolverParams
from hybridad.services.experiments import run_experiment


def run_cmd(
    preset: str = typer.Option(..., "--preset", help="fig2a_iterations | fig2b_ap_sweep | fig3a_device_sweep | fig3b_seqlen_sweep | custom"),
    set_: Optional[list[str]] = typer.Option(None, "--set", help="Scenario override field=value (repeatable)"),
    config: Optional[Path] = typer.Option(None, "--config", help="TOML scenario file"),
    trials: Optional[int] = typer.Option(None, help="Trials per sweep point"),
    workers: Optional[int] = typer.Option(None, help="Trial worker processes"),
    seed: Optional[int] = typer.Option(None, help="Root seed"),
    max_iters: Optional[int] = typer.Option(None, help="Max outer iterations (and centralized sweeps)"),
    mu: Optional[float] = typer.Option(None, help="Penalty parameter mu"),
    omega: Optional[float] = typer.Option(None, help="Initial proximal weight omega"),
    algorithm: Optional[list[str]] = typer.Option(None, "--algorithm", help="distributed / centralized (repeatable)"),
    n_devices: Optional[int] = typer.Option(None, "--n-devices"),
    n_aps: Optional[int] = typer.Option(None, "--n-aps"),
    n_antennas: Optional[int] = typer.Option(None, "--n-antennas"),
    seq_len: Optional[int] = typer.Option(None, "--seq-len"),
    lambda_c: Optional[float] = typer.Option(None, "--lambda-c"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory"),
    no_record: bool = typer.Option(False, "--no-record", help="Skip the run registry"),
) -> None:
    """Run a preset campaign and write CSV plus a JSON manifest."""
    setup_logging()
    try:
        overrides = collect_overrides(
            config,
            set_,
            seed=seed,
            n_devices=n_devices,
            n_aps=n_aps,
            n_antennas=n_antennas,
            seq_len=seq_len,
            lambda_c=lambda_c,
        )
        solver_kwargs = {"mu": mu, "omega": omega}
        if max_iters is not None:
            solver_kwargs.update(max_iters=max_iters, centralized_max_sweeps=max_iters)
        solver = SolverParams(**{k: v for k, v in solver_kwargs.items() if v is not None})
        outcome = run_experiment(
            preset,
            overrides,
            out,
            trials=trials,
            workers=workers,
            solver=solver,
            algorithms=algorithm or None,
            record=False if no_record else None,
        )
    except (HybridADError, ValidationError) as e:
        fail(e)

    table = Table(title=f"{preset} (final estimates)")
    table.add_column("point", style="cyan")
    table.add_column("algorithm", style="magenta")
    table.add_column("EER", justify="right", style="green")
    table.add_column("stderr", justify="right")
    table.add_column("gamma", justify="right")
    for row in outcome.rows:
        if row["iteration"] != "final":
            continue
        table.add_row(
            row["point"],
            row["algorithm"],
            f"{row['eer']:.4f}",
            f"{row['eer_stderr']:.4f}",
            f"{row['gamma_eer']:.3f}",
        )
    console.print(table)
    if outcome.skipped:
        console.print(f"[yellow]skipped:[/yellow] {', '.join(outcome.skipped)}")
    console.print(f"[green]✓[/green] csv={outcome.csv_path} manifest={outcome.manifest_path}")
    if outcome.run_id:
        console.print(f"[green]✓[/green] run_id={outcome.run_id}")
