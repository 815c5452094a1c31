"""Detection metrics: PM/PF threshold sweeps and the equal-error operating point."""

from __future__ import annotations

import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from hybridad.errors import DegenerateTruthError
from hybridad.models.domain import RocCurve, TrialResult

logger = logging.getLogger("hybridad.evaluation")

DEFAULT_GRID_POINTS = 512


def default_gammas(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _split(a_cont: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a_cont = np.asarray(a_cont, dtype=float)
    truth = np.asarray(truth)
    if a_cont.shape != truth.shape:
        raise ValueError(f"shape mismatch: a_cont {a_cont.shape} vs truth {truth.shape}")
    active = truth == 1
    if not np.any(active) or np.all(active):
        raise DegenerateTruthError("truth needs at least one active and one inactive device")
    return a_cont[active], a_cont[~active]


def pm_pf(a_cont: np.ndarray, truth: np.ndarray, gamma: float) -> tuple[float, float]:
    """
    pm = share of active devices with a_n < gamma,
    pf = share of inactive devices with a_n >= gamma.
    """
    act, inact = _split(a_cont, truth)
    return float(np.mean(act < gamma)), float(np.mean(inact >= gamma))


def pm_pf_curve(a_cont: np.ndarray, truth: np.ndarray, gammas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    act, inact = _split(a_cont, truth)
    g = np.asarray(gammas, dtype=float)
    pm = np.mean(act[:, None] < g[None, :], axis=0)
    pf = np.mean(inact[:, None] >= g[None, :], axis=0)
    return pm, pf


def _crossing(gammas: np.ndarray, pm: np.ndarray, pf: np.ndarray) -> tuple[float, float, bool]:
    diff = pm - pf
    hits = np.flatnonzero(diff >= 0.0)
    if hits.size == 0:
        i = int(np.argmin(np.abs(diff)))
        return float((pm[i] + pf[i]) / 2.0), float(gammas[i]), False
    i = int(hits[0])
    if i == 0 or diff[i] == 0.0:
        return float(pm[i]), float(gammas[i]), True
    t = -diff[i - 1] / (diff[i] - diff[i - 1])
    gamma = gammas[i - 1] + t * (gammas[i] - gammas[i - 1])
    eer = pm[i - 1] + t * (pm[i] - pm[i - 1])
    return float(eer), float(gamma), True


def check_monotone(curve: RocCurve) -> None:
    pts = np.asarray(curve.points, dtype=float)
    if pts.size == 0:
        return
    if np.any(np.diff(pts[:, 1]) < -1e-12) or np.any(np.diff(pts[:, 2]) > 1e-12):
        raise ValueError("PM must be non-decreasing and PF non-increasing in gamma")


def equal_error(trials: Sequence[TrialResult], gammas: Optional[Iterable[float]] = None) -> RocCurve:
    """
    Pool PM/PF over trials (average per gamma) and locate PM = PF.

    The crossing is interpolated linearly between the two grid points where
    PM - PF changes sign. Without a crossing the gamma minimizing |PM - PF| is
    returned and RocCurve.crossed is False.
    """
    if not trials:
        raise ValueError("equal_error needs at least one trial")
    g = default_gammas() if gammas is None else np.asarray(list(gammas), dtype=float)

    pm_sum = np.zeros_like(g)
    pf_sum = np.zeros_like(g)
    for t in trials:
        pm, pf = pm_pf_curve(t.a_cont, t.truth, g)
        pm_sum += pm
        pf_sum += pf
    T = len(trials)
    pm_avg = pm_sum / T
    pf_avg = pf_sum / T

    eer, gamma_eer, crossed = _crossing(g, pm_avg, pf_avg)
    if not crossed:
        logger.warning("no PM/PF crossing on grid; using argmin |PM-PF| gamma=%.4f", gamma_eer)

    stderr = 0.0
    if T > 1:
        per_trial = [sum(pm_pf(t.a_cont, t.truth, gamma_eer)) / 2.0 for t in trials]
        stderr = float(np.std(per_trial, ddof=1) / math.sqrt(T))

    curve = RocCurve(
        points=[(float(x), float(p), float(f)) for x, p, f in zip(g, pm_avg, pf_avg)],
        eer=min(1.0, max(0.0, eer)),
        gamma_eer=gamma_eer,
        crossed=crossed,
        eer_stderr=stderr,
    )
    check_monotone(curve)
    return curve


def eer_by_iteration(trials: Sequence[TrialResult], gammas: Optional[Iterable[float]] = None) -> list[RocCurve]:
    """
    One curve per history index, freezing a at that iteration.

    Trials that stopped early contribute their final estimate to later indices.
    """
    if not trials:
        raise ValueError("eer_by_iteration needs at least one trial")
    depth = max(len(t.history) for t in trials)
    curves = []
    for i in range(depth):
        frozen = [
            TrialResult(
                a_cont=t.history[min(i, len(t.history) - 1)] if t.history else t.a_cont,
                truth=t.truth,
                iterations_used=t.iterations_used,
                wall_time=0.0,
            )
            for t in trials
        ]
        curves.append(equal_error(frozen, gammas))
    return curves
