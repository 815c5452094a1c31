"""Helpers shared by the CLI commands: overrides, config files, logging, error exit."""

from __future__ import annotations

import json
import logging
import sys
import tomllib
from pathlib import Path
from typing import Any, NoReturn, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from hybridad.config.settings import settings
from hybridad.errors import ConfigError, HybridADError

console = Console()


def setup_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(name)s %(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _coerce(raw: str) -> Any:
    # JSON first so numbers, booleans, null and lists come through typed
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_sets(pairs: Optional[list[str]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects field=value, got {pair!r}", field=pair)
        out[key.strip()] = _coerce(value.strip())
    return out


def load_config_file(path: Optional[Path]) -> dict[str, Any]:
    """TOML scenario file; keys are ScenarioConfig fields (a [scenario] table is also accepted)."""
    if path is None:
        return {}
    try:
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}", field="config") from e
    data = data.get("scenario", data)
    if "ap_positions" in data and data["ap_positions"] is not None:
        data["ap_positions"] = tuple(tuple(p) for p in data["ap_positions"])
    return dict(data)


def collect_overrides(config: Optional[Path], sets: Optional[list[str]], **flags: Any) -> dict[str, Any]:
    """config file < --set < dedicated flags."""
    overrides = load_config_file(config)
    overrides.update(parse_sets(sets))
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return overrides


def error_record(e: Exception) -> dict:
    if isinstance(e, HybridADError):
        return e.record()
    if isinstance(e, ValidationError):
        err = e.errors()[0]
        loc = err.get("loc") or ("",)
        return {"error": "ConfigError", "message": str(err.get("msg")), "field": str(loc[0])}
    return {"error": type(e).__name__, "message": str(e)}


def fail(e: Exception) -> NoReturn:
    console.print(f"[red]✗[/red] Error: {e}")
    sys.stderr.write(json.dumps(error_record(e), sort_keys=True) + "\n")
    raise typer.Exit(1)
