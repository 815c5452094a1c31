from __future__ import annotations

from pathlib import Path
from typing import Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine

from hybridad.config.settings import settings

DUCKDB_PREFIX = "duckdb:///"


def build_engine(db_url: Optional[str] = None) -> Engine:
    """
    Engine for the run registry.

    Tests pass duckdb:///:memory: or a tmp_path URL; everything else uses settings.db_url.
    """
    url = db_url or settings.db_url
    if url.startswith(DUCKDB_PREFIX) and not url.endswith(":memory:"):
        Path(url[len(DUCKDB_PREFIX):]).parent.mkdir(parents=True, exist_ok=True)
    return create_engine(url, future=True)
