from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Optional
from uuid import uuid4

from sqlalchemy import text
from sqlalchemy.engine import Engine


def utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(tzinfo=None)


@dataclass(frozen=True)
class RunRow:
    run_id: str
    created_at: datetime
    preset: str
    status: str
    manifest_json: Optional[str]
    csv_path: Optional[str]
    error_text: Optional[str]


@dataclass(frozen=True)
class CurvePointRow:
    point_label: str
    algorithm: str
    iteration: Optional[int]
    eer: float
    eer_stderr: float
    gamma_eer: float
    trials: int


class RunsRepo:
    """
    Registry of experiment runs and their EER points.

    The CSV and manifest on disk stay authoritative; this is an index over them.
    """

    def __init__(self, engine: Engine) -> None:
        self._engine = engine

    def create_run(self, preset: str, manifest_json: str | None = None) -> str:
        run_id = str(uuid4())
        with self._engine.begin() as conn:
            conn.execute(
                text(
                    """
                    INSERT INTO experiment_runs (run_id, created_at, preset, status, manifest_json, csv_path, error_text)
                    VALUES (:run_id, :created_at, :preset, 'started', :manifest_json, NULL, NULL)
                    """
                ),
                {"run_id": run_id, "created_at": utcnow(), "preset": preset, "manifest_json": manifest_json},
            )
        return run_id

    def mark_completed(self, run_id: str, csv_path: str | None = None) -> None:
        with self._engine.begin() as conn:
            conn.execute(
                text(
                    "UPDATE experiment_runs SET status = 'completed', csv_path = :csv_path, error_text = NULL "
                    "WHERE run_id = :run_id"
                ),
                {"run_id": run_id, "csv_path": csv_path},
            )

    def mark_failed(self, run_id: str, error_text: str) -> None:
        with self._engine.begin() as conn:
            conn.execute(
                text("UPDATE experiment_runs SET status = 'failed', error_text = :error_text WHERE run_id = :run_id"),
                {"run_id": run_id, "error_text": error_text},
            )

    def add_points(self, run_id: str, points: Iterable[CurvePointRow]) -> int:
        rows = [
            {
                "point_id": str(uuid4()),
                "run_id": run_id,
                "point_label": p.point_label,
                "algorithm": p.algorithm,
                "iteration": p.iteration,
                "eer": p.eer,
                "eer_stderr": p.eer_stderr,
                "gamma_eer": p.gamma_eer,
                "trials": p.trials,
            }
            for p in points
        ]
        if not rows:
            return 0
        with self._engine.begin() as conn:
            conn.execute(
                text(
                    """
                    INSERT INTO curve_points
                        (point_id, run_id, point_label, algorithm, iteration, eer, eer_stderr, gamma_eer, trials)
                    VALUES
                        (:point_id, :run_id, :point_label, :algorithm, :iteration, :eer, :eer_stderr, :gamma_eer, :trials)
                    """
                ),
                rows,
            )
        return len(rows)

    def get_run(self, run_id: str) -> RunRow | None:
        with self._engine.connect() as conn:
            row = conn.execute(
                text(
                    """
                    SELECT run_id, created_at, preset, status, manifest_json, csv_path, error_text
                    FROM experiment_runs
                    WHERE run_id = :run_id
                    """
                ),
                {"run_id": run_id},
            ).fetchone()
        return RunRow(*row) if row is not None else None

    def list_runs(self, limit: int = 20) -> list[RunRow]:
        with self._engine.connect() as conn:
            rows = conn.execute(
                text(
                    """
                    SELECT run_id, created_at, preset, status, manifest_json, csv_path, error_text
                    FROM experiment_runs
                    ORDER BY created_at DESC
                    LIMIT :limit
                    """
                ),
                {"limit": limit},
            ).fetchall()
        return [RunRow(*r) for r in rows]

    def get_points(self, run_id: str) -> list[CurvePointRow]:
        with self._engine.connect() as conn:
            rows = conn.execute(
                text(
                    """
                    SELECT point_label, algorithm, iteration, eer, eer_stderr, gamma_eer, trials
                    FROM curve_points
                    WHERE run_id = :run_id
                    ORDER BY point_label, algorithm, iteration NULLS LAST
                    """
                ),
                {"run_id": run_id},
            ).fetchall()
        return [CurvePointRow(*r) for r in rows]
