from __future__ import annotations

from sqlalchemy.engine import Engine

from hybridad.db.schema import Base


def _commit_raw(conn) -> None:
    # DuckDB wants an explicit DBAPI commit after DDL on a plain connection
    try:
        raw = conn.connection
        if hasattr(raw, "commit"):
            raw.commit()
    except Exception:
        pass


def init_db(engine: Engine) -> None:
    """Drop and recreate the registry tables."""
    conn = engine.connect()
    try:
        Base.metadata.drop_all(bind=conn)
        Base.metadata.create_all(bind=conn)
        _commit_raw(conn)
    finally:
        conn.close()


def ensure_db(engine: Engine) -> None:
    """Create missing tables, keep existing rows."""
    conn = engine.connect()
    try:
        Base.metadata.create_all(bind=conn)
        _commit_raw(conn)
    finally:
        conn.close()
