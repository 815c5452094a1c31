from __future__ import annotations

from datetime import datetime
from typing import Optional
from uuid import uuid4

from sqlalchemy import DateTime, Float, Integer, String, Text
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


def _uuid() -> str:
    return str(uuid4())


class Base(DeclarativeBase):
    pass


class ExperimentRun(Base):
    """
    One row per run_experiment call.
    """
    __tablename__ = "experiment_runs"

    run_id: Mapped[str] = mapped_column(String, primary_key=True, default=_uuid)
    created_at: Mapped[datetime] = mapped_column(DateTime, nullable=False, default=datetime.utcnow)

    preset: Mapped[str] = mapped_column(String, nullable=False, index=True)
    status: Mapped[str] = mapped_column(String, nullable=False)  # started/completed/failed
    manifest_json: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    csv_path: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    error_text: Mapped[Optional[str]] = mapped_column(Text, nullable=True)


class CurvePoint(Base):
    """
    One EER value of a run: (sweep point, algorithm, iteration).
    iteration is NULL for the final estimate.
    """
    __tablename__ = "curve_points"

    point_id: Mapped[str] = mapped_column(String, primary_key=True, default=_uuid)
    run_id: Mapped[str] = mapped_column(String, nullable=False, index=True)

    point_label: Mapped[str] = mapped_column(String, nullable=False)
    algorithm: Mapped[str] = mapped_column(String, nullable=False)
    iteration: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)

    eer: Mapped[float] = mapped_column(Float, nullable=False)
    eer_stderr: Mapped[float] = mapped_column(Float, nullable=False)
    gamma_eer: Mapped[float] = mapped_column(Float, nullable=False)
    trials: Mapped[int] = mapped_column(Integer, nullable=False)
