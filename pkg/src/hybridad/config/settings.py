from __future__ import annotations

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Centralized config.

    Key idea:
    - read from env first (so tests/CI can override),
    - otherwise default to local dev values.
    """

    model_config = SettingsConfigDict(env_prefix="HYBRIDAD_", extra="ignore")

    # Run registry, DuckDB file by default (portable, zero-setup)
    db_url: str = "duckdb:///data/hybridad.duckdb"
    record_runs: bool = True

    # Experiment outputs (CSV + JSON manifest per run)
    reports_dir: str = "reports"

    # Monte-Carlo defaults
    default_trials: int = 500
    default_workers: int = 1

    # Dense oracle paths: max LK for an LK x LK matrix, max entries for stacked Psi
    oracle_cap: int = 512
    nullspace_cap: int = 4_000_000

    log_level: str = "INFO"


settings = Settings()
