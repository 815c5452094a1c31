"""Validated inputs: scenario and solver configuration."""

from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from hybridad.config.settings import settings


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


class ScenarioConfig(BaseModel):
    """
    Full description of one experiment.

    Symbols: n_devices=N, n_aps=M, n_antennas=K, seq_len=L, n_scatterers=L_m.
    Identical configs (seed included) produce bit-identical scenarios.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    area_side: float = Field(200.0, gt=0)
    n_devices: int = Field(100, ge=1)
    n_aps: int = Field(3, ge=1)
    n_antennas: int = Field(24, ge=2)
    seq_len: int = Field(6, ge=1)
    lambda_c: float = Field(0.2, gt=0)
    n_scatterers: int = Field(8, ge=1)
    sigma_scatter_sq: float = Field(1.0, gt=0)
    active_ratio: float = Field(0.1, gt=0, lt=1)
    noise_power_dbm: float = -99.0
    tx_power_dbm: float = 23.0
    seed: int = Field(0, ge=0, lt=2**64)
    ap_positions: Optional[tuple[tuple[float, float], ...]] = None
    array_axis: tuple[float, float] = (1.0, 0.0)

    @field_validator("array_axis")
    @classmethod
    def _unit_axis(cls, v: tuple[float, float]) -> tuple[float, float]:
        norm = math.hypot(v[0], v[1])
        if norm == 0 or not math.isfinite(norm):
            raise ValueError("array_axis must be a nonzero finite 2-D vector")
        return (v[0] / norm, v[1] / norm)

    @model_validator(mode="after")
    def _check_ap_positions(self) -> "ScenarioConfig":
        if self.ap_positions is None:
            return self
        if len(self.ap_positions) != self.n_aps:
            raise ValueError(f"ap_positions has {len(self.ap_positions)} entries but n_aps={self.n_aps}")
        half = self.area_side / 2.0
        for x, y in self.ap_positions:
            if abs(x) > half or abs(y) > half:
                raise ValueError(f"ap position ({x}, {y}) outside [-{half}, {half}]^2")
        return self

    @property
    def aperture(self) -> float:
        return (self.n_antennas - 1) * self.lambda_c / 2.0

    @property
    def noise_var(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)

    @property
    def tx_power(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def n_active(self) -> int:
        # round half up
        return int(math.floor(self.active_ratio * self.n_devices + 0.5))


class SolverParams(BaseModel):
    """Tuning of the local CD solver and of the consensus outer loop."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    omega: float = Field(1.0, ge=0)
    mu: float = Field(50.0, gt=0)
    sweeps_per_call: int = Field(1, ge=1)
    refactor_every: int = Field(1, ge=1)
    oracle_cap: int = Field(default_factory=lambda: settings.oracle_cap, ge=1)

    # omega doubling guard on the exact local objective
    adaptive_omega: bool = True
    omega_max_doublings: int = Field(10, ge=0)
    descent_tol: float = Field(1e-10, ge=0)
    dead_step: float = Field(1e-12, ge=0)
    # grow accepted surrogate steps while the exact objective keeps falling
    step_expansion: bool = True
    max_step_doublings: int = Field(40, ge=0)

    shuffle_coordinates: bool = False
    order_seed: int = Field(0, ge=0)

    # consensus / centralized loops
    max_iters: int = Field(30, ge=1)
    tol_a: float = Field(1e-4, gt=0)
    centralized_max_sweeps: int = Field(30, ge=1)
    centralized_tol: float = Field(1e-6, gt=0)
    ap_workers: int = Field(1, ge=1)
    track_objective: bool = False


PRESET_NAMES = ("fig2a_iterations", "fig2b_ap_sweep", "fig3a_device_sweep", "fig3b_seqlen_sweep", "custom")
ALGORITHMS = ("distributed", "centralized")


class ExperimentSpec(BaseModel):
    """A resolved Monte-Carlo campaign: preset, base scenario, solver tuning and trial budget."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    preset: Literal["fig2a_iterations", "fig2b_ap_sweep", "fig3a_device_sweep", "fig3b_seqlen_sweep", "custom"]
    base: ScenarioConfig = Field(default_factory=ScenarioConfig)
    solver: SolverParams = Field(default_factory=SolverParams)
    trials: int = Field(default_factory=lambda: settings.default_trials, ge=1)
    workers: int = Field(default_factory=lambda: settings.default_workers, ge=1)
    algorithms: tuple[Literal["distributed", "centralized"], ...] = ("distributed",)
    per_iteration: bool = False
