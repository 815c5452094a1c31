"""
Distributed consensus detection.

CPU broadcasts a, every AP runs its local CD sweeps and dual ascent and sends
mu*theta_m + lambda_m upstream, the CPU projects the average back onto [0, 1]^N.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from hybridad.errors import HybridADError, SolverError
from hybridad.models.domain import ActivityVector, Direction, FronthaulRecord, ReceivedSignal, Scenario
from hybridad.models.schemas import SolverParams
from hybridad.services.solver import LocalState, cd_sweep, init_local_state, local_objective

logger = logging.getLogger("hybridad.consensus")


@dataclass
class CpuState:
    a: np.ndarray
    iteration: int = 0
    history: list[np.ndarray] = field(default_factory=list)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    a: np.ndarray
    delta_inf: float
    consensus_residual: float
    local_objectives: Optional[tuple[float, ...]] = None


class Fronthaul(Protocol):
    """Transport between APs and the CPU. Only message shapes are recorded."""

    def broadcast(self, iteration: int, a: np.ndarray) -> np.ndarray: ...

    def uplink(self, iteration: int, ap_index: int, message: np.ndarray) -> np.ndarray: ...

    @property
    def log(self) -> list[FronthaulRecord]: ...


class InProcessFronthaul:
    """Passes arrays by copy and records one FronthaulRecord per message."""

    def __init__(self) -> None:
        self._log: list[FronthaulRecord] = []

    @property
    def log(self) -> list[FronthaulRecord]:
        return self._log

    def broadcast(self, iteration: int, a: np.ndarray) -> np.ndarray:
        self._log.append(FronthaulRecord(Direction.DOWN, iteration, -1, int(a.shape[0])))
        return a.copy()

    def uplink(self, iteration: int, ap_index: int, message: np.ndarray) -> np.ndarray:
        self._log.append(FronthaulRecord(Direction.UP, iteration, ap_index, int(message.shape[0])))
        return message.copy()

    def uplink_total(self) -> int:
        return sum(r.payload_len for r in self._log if r.direction is Direction.UP)


@dataclass(frozen=True)
class ConsensusResult:
    a: ActivityVector
    history: tuple[IterationRecord, ...]
    fronthaul: tuple[FronthaulRecord, ...]
    iterations: int
    states: tuple[LocalState, ...] = ()


def dual_ascent(lam: np.ndarray, theta: np.ndarray, a: np.ndarray, mu: float) -> np.ndarray:
    if mu <= 0:
        raise ValueError("mu must be positive")
    return np.asarray(lam, dtype=float) + mu * (np.asarray(theta, dtype=float) - np.asarray(a, dtype=float))


def cpu_aggregate(messages: Sequence[np.ndarray], mu: float, M: int) -> np.ndarray:
    """a_n = clamp(sum_m msg_{m,n} / (M mu), 0, 1); messages are summed in the given order."""
    if len(messages) != M:
        raise ValueError(f"expected {M} messages, got {len(messages)}")
    if mu <= 0:
        raise ValueError("mu must be positive")
    total = np.zeros_like(np.asarray(messages[0], dtype=float))
    for msg in messages:
        total = total + np.asarray(msg, dtype=float)
    return np.clip(total / (M * mu), 0.0, 1.0)


def detect(a_cont: np.ndarray, gamma: float) -> np.ndarray:
    gamma = min(1.0, max(0.0, float(gamma)))
    return (np.asarray(a_cont) >= gamma).astype(int)


def _ap_update(state: LocalState, a: np.ndarray, params: SolverParams) -> np.ndarray:
    for _ in range(params.sweeps_per_call):
        cd_sweep(state, a, params)
    state.lambda_dual = dual_ascent(state.lambda_dual, state.theta, a, params.mu)
    return params.mu * state.theta + state.lambda_dual


def _run_ap(state: LocalState, a: np.ndarray, params: SolverParams) -> np.ndarray:
    try:
        return _ap_update(state, a, params)
    except SolverError:
        raise
    except (HybridADError, np.linalg.LinAlgError, ValueError, FloatingPointError) as e:
        raise SolverError(str(e), ap_index=state.ap_index) from e


def run_algorithm1(
    scenario: Scenario,
    y_all: Sequence[ReceivedSignal],
    params: SolverParams,
    max_iters: Optional[int] = None,
    fronthaul: Optional[Fronthaul] = None,
) -> ConsensusResult:
    max_iters = max_iters if max_iters is not None else params.max_iters
    M = len(y_all)
    N = scenario.cfg.n_devices
    S = scenario.signatures.S
    link = fronthaul if fronthaul is not None else InProcessFronthaul()

    states = [
        init_local_state(y, scenario.stats_row(m), S, np.zeros(N), np.zeros(N), ap_index=m)
        for m, y in enumerate(y_all)
    ]
    cpu = CpuState(a=np.zeros(N))
    records: list[IterationRecord] = []

    pool = ThreadPoolExecutor(max_workers=params.ap_workers) if params.ap_workers > 1 and M > 1 else None
    try:
        for i in range(1, max_iters + 1):
            a_prev = cpu.a
            a_bcast = link.broadcast(i, a_prev)
            if pool is None:
                outputs = [_run_ap(s, a_bcast, params) for s in states]
            else:
                futures = [pool.submit(_run_ap, s, a_bcast, params) for s in states]
                outputs = [f.result() for f in futures]

            messages = [link.uplink(i, m, msg) for m, msg in enumerate(outputs)]
            cpu.a = cpu_aggregate(messages, params.mu, M)
            cpu.iteration = i
            cpu.history.append(cpu.a.copy())

            delta = float(np.max(np.abs(cpu.a - a_prev))) if N else 0.0
            residual = float(sum(np.sum((s.theta - cpu.a) ** 2) for s in states))
            objectives = (
                tuple(local_objective(s, cpu.a, params) for s in states) if params.track_objective else None
            )
            records.append(IterationRecord(i, cpu.a.copy(), delta, residual, objectives))
            logger.debug("iter=%d delta_inf=%.3e consensus_residual=%.3e", i, delta, residual)
            if delta < params.tol_a:
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    logger.info("algorithm1 iterations=%d M=%d N=%d", cpu.iteration, M, N)
    return ConsensusResult(
        a=cpu.a.copy(),
        history=tuple(records),
        fronthaul=tuple(link.log),
        iterations=cpu.iteration,
        states=tuple(states),
    )


def write_fronthaul_csv(records: Sequence[FronthaulRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=["iteration", "ap", "direction", "payload_len"])
        w.writeheader()
        for r in records:
            w.writerow(
                {"iteration": r.iteration, "ap": r.ap_index, "direction": r.direction.value, "payload_len": r.payload_len}
            )
    return path


def history_rows(history: Sequence[IterationRecord]) -> list[dict]:
    """Convergence trace as flat dicts (one per outer iteration)."""
    rows = []
    for rec in history:
        row = {
            "iteration": rec.iteration,
            "delta_inf": rec.delta_inf,
            "consensus_residual": rec.consensus_residual,
        }
        if rec.local_objectives is not None:
            row["local_objectives"] = list(rec.local_objectives)
        rows.append(row)
    return rows
