from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError

from hybridad.cli.analyze import analyze_cmd
from hybridad.cli.common import collect_overrides, console, fail, setup_logging
from hybridad.cli.list_runs import list_runs_cmd
from hybridad.cli.run import run_cmd
from hybridad.cli.trace import trace_cmd
from hybridad.db.engine import build_engine
from hybridad.db.init_db import init_db
from hybridad.errors import HybridADError
from hybridad.services.channel import build_scenario, dump_channels
from hybridad.services.experiments import resolve_config
from hybridad.services.rng import substream
from hybridad.services.scenario import scenario_summary

app = typer.Typer(help="hybridad CLI (experiments, identifiability analysis, traces, run registry).")


@app.command("init-db")
def init_db_cmd() -> None:
    """Recreate the run registry tables."""
    engine = build_engine()
    init_db(engine)
    typer.echo("✅ Run registry initialized.")


@app.command("dump-scenario")
def dump_scenario_cmd(
    config: Optional[Path] = typer.Option(None, "--config", help="TOML scenario file"),
    set_: Optional[list[str]] = typer.Option(None, "--set", help="Scenario override field=value (repeatable)"),
    seed: Optional[int] = typer.Option(None, help="Scenario seed"),
    channels: Optional[Path] = typer.Option(None, "--channels", help="Also write one channel draw as JSON"),
) -> None:
    """Print the resolved config with derived geometry (Rayleigh distance, near-field counts)."""
    setup_logging()
    try:
        cfg = resolve_config(collect_overrides(config, set_, seed=seed))
        summary = scenario_summary(cfg)
        if channels is not None:
            dump_channels(build_scenario(cfg), substream(cfg.seed, "channels"), channels)
    except (HybridADError, ValidationError) as e:
        fail(e)
    typer.echo(json.dumps(summary, sort_keys=True, indent=2))
    if channels is not None:
        console.print(f"[green]✓[/green] channels written to {channels}")


app.command("run")(run_cmd)
app.command("analyze")(analyze_cmd)
app.command("trace")(trace_cmd)
app.command("list-runs")(list_runs_cmd)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
