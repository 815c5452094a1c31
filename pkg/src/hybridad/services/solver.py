"""
Per-AP coordinate-descent solver.

Each coordinate step minimizes a quartic surrogate of the local objective
    f_m(theta) + lambda^T (theta - a) + mu/2 ||theta - a||^2,
f_m(theta) = log|C(theta)| + u^H C(theta)^{-1} u,  u = y - mean(theta),
built from first-order Taylor forms of log|C + d X X^H| and (C + d X X^H)^{-1}.
A descending surrogate step is then stretched by doubling while the exact
change keeps falling.
The state itself (C^{-1} and u) is always updated with the exact
Sherman-Morrison-Woodbury identity, so approximation error never accumulates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from hybridad.errors import NonFiniteInputError, OracleCapError
from hybridad.models.domain import ChannelStats, ComplexArray, ReceivedSignal, Scenario, XFactor
from hybridad.models.schemas import SolverParams
from hybridad.services.cubic import solve_cubic
from hybridad.services.rng import substream

logger = logging.getLogger("hybridad.solver")

# (I + d X^H C^{-1} X) above this condition number forces a full refactorization
SMW_COND_LIMIT = 1e12


@dataclass(frozen=True)
class QuarticCoeffs:
    """q(d) = rho1 d + rho2 d^2 + rho3 d^3 + rho4 d^4 (+ omega/2 d^2 when minimized)."""

    rho1: float
    rho2: float
    rho3: float
    rho4: float

    def __add__(self, other: "QuarticCoeffs") -> "QuarticCoeffs":
        return QuarticCoeffs(
            self.rho1 + other.rho1,
            self.rho2 + other.rho2,
            self.rho3 + other.rho3,
            self.rho4 + other.rho4,
        )

    def value(self, d: float, omega: float = 0.0) -> float:
        return d * (self.rho1 + d * (self.rho2 + omega / 2.0 + d * (self.rho3 + d * self.rho4)))

    def derivative(self, d: float, omega: float = 0.0) -> float:
        return self.rho1 + d * (2.0 * self.rho2 + omega + d * (3.0 * self.rho3 + d * 4.0 * self.rho4))


ZERO_COEFFS = QuarticCoeffs(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SweepRecord:
    sweep: int
    omega: float
    objective_change: float
    max_step: float
    accepted_steps: int
    retries: int


@dataclass
class LocalState:
    """
    Single-writer state of one AP.

    Invariants: cov_inv == (noise_var I + sum_n theta_n X_n X_n^H)^{-1},
    residual == y - sum_n theta_n (h_bar_n kron s_n), theta in [0, 1]^N.
    """

    ap_index: int
    y: ComplexArray
    theta: np.ndarray
    lambda_dual: np.ndarray
    cov_inv: ComplexArray
    residual: ComplexArray
    x_factors: list[XFactor]
    noise_var: float
    omega: Optional[float] = None
    sweeps: int = 0
    trace: list[SweepRecord] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.y.shape[0])

    def snapshot(self) -> tuple[np.ndarray, ComplexArray, ComplexArray]:
        return self.theta.copy(), self.cov_inv.copy(), self.residual.copy()

    def restore(self, snap: tuple[np.ndarray, ComplexArray, ComplexArray]) -> None:
        theta, cov_inv, residual = snap
        self.theta = theta.copy()
        self.cov_inv = cov_inv.copy()
        self.residual = residual.copy()


@dataclass(frozen=True)
class CoordinateTerms:
    """Products shared by the surrogate, the exact step change and the SMW update."""

    P: ComplexArray  # C^{-1} X  (LK, J)
    A: ComplexArray  # X^H C^{-1} X  (J, J)
    pu: ComplexArray  # X^H C^{-1} u
    px: ComplexArray  # X^H C^{-1} x_bar
    u_w: float  # u^H C^{-1} u
    u_z: complex  # u^H C^{-1} x_bar
    x_z: float  # x_bar^H C^{-1} x_bar
    mean_part: ComplexArray


def _check_finite(name: str, arr) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError(f"{name} has nonfinite entries")


def covariance_dense(state: LocalState) -> ComplexArray:
    C = state.noise_var * np.eye(state.dim, dtype=complex)
    for n, x in enumerate(state.x_factors):
        if state.theta[n] != 0.0:
            C += state.theta[n] * x.outer()
    return C


def _hermitian_inverse(C: ComplexArray) -> ComplexArray:
    factor = linalg.cho_factor(C, lower=True)
    inv = linalg.cho_solve(factor, np.eye(C.shape[0], dtype=complex))
    return (inv + inv.conj().T) / 2.0


def _fresh_residual(state: LocalState) -> ComplexArray:
    u = state.y.copy()
    for n, x in enumerate(state.x_factors):
        if x.near and state.theta[n] != 0.0:
            u -= state.theta[n] * x.mean_part
    return u


def refactorize(state: LocalState) -> None:
    """Rebuild cov_inv and residual from theta, clearing accumulated drift."""
    if np.any(state.theta != 0.0):
        state.cov_inv = _hermitian_inverse(covariance_dense(state))
    else:
        state.cov_inv = np.eye(state.dim, dtype=complex) / state.noise_var
    state.residual = _fresh_residual(state)


def init_local_state(
    y_m: ReceivedSignal,
    stats_row: Sequence[ChannelStats],
    S: np.ndarray,
    theta0: np.ndarray,
    lambda0: np.ndarray,
    ap_index: int = 0,
) -> LocalState:
    theta0 = np.asarray(theta0, dtype=float)
    lambda0 = np.asarray(lambda0, dtype=float)
    _check_finite("y", y_m.y)
    _check_finite("theta0", theta0)
    _check_finite("lambda0", lambda0)
    if np.any(theta0 < 0.0) or np.any(theta0 > 1.0):
        raise ValueError("theta0 must lie in [0, 1]^N")
    if y_m.noise_var <= 0:
        raise ValueError("noise variance must be positive")

    state = LocalState(
        ap_index=ap_index,
        y=np.asarray(y_m.y, dtype=complex),
        theta=theta0.copy(),
        lambda_dual=lambda0.copy(),
        cov_inv=np.empty((0, 0), dtype=complex),
        residual=np.empty(0, dtype=complex),
        x_factors=[XFactor.from_stats(st, S[:, st.device]) for st in stats_row],
        noise_var=float(y_m.noise_var),
    )
    refactorize(state)
    return state


def coordinate_terms(state: LocalState, n: int) -> CoordinateTerms:
    x = state.x_factors[n]
    P = x.left_product(state.cov_inv)
    A = x.gram(P)
    A = (A + A.conj().T) / 2.0
    w = state.cov_inv @ state.residual
    pu = x.rmatvec(w)
    u_w = float(np.real(np.vdot(state.residual, w)))
    if x.near:
        z = state.cov_inv @ x.mean_part
        px = x.rmatvec(z)
        u_z = complex(np.vdot(state.residual, z))
        x_z = float(np.real(np.vdot(x.mean_part, z)))
    else:
        px = np.zeros(x.rank, dtype=complex)
        u_z = 0j
        x_z = 0.0
    return CoordinateTerms(P=P, A=A, pu=pu, px=px, u_w=u_w, u_z=u_z, x_z=x_z, mean_part=x.mean_part)


def coeffs_from_terms(
    t: CoordinateTerms, lam_n: float, mu: float, theta_n: float, a_n: float
) -> QuarticCoeffs:
    Apu = t.A @ t.pu
    Apx = t.A @ t.px
    rho1 = (
        float(np.real(np.trace(t.A)))
        - float(np.real(np.vdot(t.pu, t.pu)))
        - 2.0 * t.u_z.real
        + lam_n
        + mu * (theta_n - a_n)
    )
    rho2 = (
        t.x_z
        + 2.0 * float(np.real(np.vdot(t.pu, t.px)))
        + float(np.real(np.vdot(t.pu, Apu)))
        + mu / 2.0
    )
    rho3 = -2.0 * float(np.real(np.vdot(t.pu, Apx))) - float(np.real(np.vdot(t.px, t.px)))
    rho4 = max(0.0, float(np.real(np.vdot(t.px, Apx))))
    return QuarticCoeffs(rho1, rho2, rho3, rho4)


def quartic_coeffs(state: LocalState, n: int, a_n: float, params: SolverParams) -> QuarticCoeffs:
    """Surrogate coefficients for coordinate n, dual and penalty terms included."""
    t = coordinate_terms(state, n)
    return coeffs_from_terms(t, float(state.lambda_dual[n]), params.mu, float(state.theta[n]), a_n)


def exact_step_change(
    t: CoordinateTerms, d: float, lam_n: float, mu: float, theta_n: float, a_n: float
) -> float:
    """
    Exact change of the local objective when theta_n moves by d.

    Uses log|C + d X X^H| - log|C| = log|I + d A| and the SMW identity, all in
    the J-dimensional space.
    """
    J = t.A.shape[0]
    M = np.eye(J, dtype=complex) + d * t.A
    sign, logdet = np.linalg.slogdet(M)
    if np.real(sign) <= 0.0:
        return math.inf
    pv = t.pu - d * t.px
    corr = d * float(np.real(np.vdot(pv, np.linalg.solve(M, pv))))
    quad = -2.0 * d * t.u_z.real + d * d * t.x_z - corr
    penalty = lam_n * d + mu / 2.0 * ((theta_n + d - a_n) ** 2 - (theta_n - a_n) ** 2)
    return float(logdet) + quad + penalty


def minimize_quartic(c: QuarticCoeffs, omega: float, lo: float, hi: float) -> float:
    """
    Global minimizer over [lo, hi] of rho1 d + (rho2 + omega/2) d^2 + rho3 d^3 + rho4 d^4.

    Candidates are the real stationary points in [lo, hi], both endpoints and 0;
    ties go to the smaller |d|.
    """
    values = (c.rho1, c.rho2, c.rho3, c.rho4, omega, lo, hi)
    if not all(math.isfinite(v) for v in values):
        raise NonFiniteInputError(f"nonfinite quartic input {values}")
    if not lo <= 0.0 <= hi:
        raise ValueError(f"interval [{lo}, {hi}] must contain 0")

    roots = solve_cubic(4.0 * c.rho4, 3.0 * c.rho3, 2.0 * c.rho2 + omega, c.rho1)
    candidates = [lo, hi, 0.0] + [r for r in roots if math.isfinite(r) and lo <= r <= hi]
    return min(candidates, key=lambda d: (c.value(d, omega), abs(d)))


def apply_step(state: LocalState, n: int, d: float, terms: Optional[CoordinateTerms] = None) -> None:
    """theta_n += d with the exact SMW update of cov_inv and the residual update."""
    if d == 0.0:
        return
    t = terms if terms is not None else coordinate_terms(state, n)
    J = t.A.shape[0]
    M = np.eye(J, dtype=complex) + d * t.A
    cond = np.linalg.cond(M)
    state.theta[n] = min(1.0, max(0.0, state.theta[n] + d))
    if not np.isfinite(cond) or cond > SMW_COND_LIMIT:
        logger.debug("ap=%d device=%d cond=%.3e refactorize", state.ap_index, n, cond)
        refactorize(state)
        return
    gain = np.linalg.solve(M, t.P.conj().T)
    cov_inv = state.cov_inv - d * (t.P @ gain)
    state.cov_inv = (cov_inv + cov_inv.conj().T) / 2.0
    if state.x_factors[n].near:
        state.residual = state.residual - d * t.mean_part


def _coordinate_order(n_devices: int, params: SolverParams, ap_index: int, sweep: int) -> np.ndarray:
    if not params.shuffle_coordinates:
        return np.arange(n_devices)
    return substream(params.order_seed, "coordinate_order", ap_index, sweep).permutation(n_devices)


def expand_step(
    change: Callable[[float], float], d: float, lo: float, hi: float, params: SolverParams
) -> tuple[float, float]:
    """
    Double a descending surrogate step inside [lo, hi] while the exact change keeps falling.

    The first-order log-det term makes the surrogate step roughly 1/||X^H C^{-1} X||,
    which is far too short near theta = 0 at high SNR. Returns (step, exact change).
    """
    best = change(d)
    if not params.step_expansion or not best < 0.0:
        return d, best
    for _ in range(params.max_step_doublings):
        cand = min(hi, max(lo, 2.0 * d))
        if cand == d:
            break
        value = change(cand)
        if not value < best:
            break
        d, best = cand, value
    return d, best


def _sweep_states(
    states: Sequence[LocalState],
    a: np.ndarray,
    mu: float,
    omega: float,
    params: SolverParams,
    order: np.ndarray,
    use_duals: bool,
) -> tuple[float, float, int]:
    """
    One coordinate pass shared by every state in `states`.

    A single state is the per-AP subproblem. Several states sharing theta are the
    centralized problem: coefficients and exact changes are summed over APs and
    the same step is applied to all of them.
    """
    total = 0.0
    max_step = 0.0
    accepted = 0
    for n in order:
        theta_n = float(states[0].theta[n])
        a_n = float(a[n])
        terms = [coordinate_terms(s, n) for s in states]
        lams = [float(s.lambda_dual[n]) if use_duals else 0.0 for s in states]
        coeffs = ZERO_COEFFS
        for t, lam in zip(terms, lams):
            coeffs = coeffs + coeffs_from_terms(t, lam, mu, theta_n, a_n)
        lo, hi = -theta_n, 1.0 - theta_n
        d = minimize_quartic(coeffs, omega, lo, hi)
        if abs(d) <= params.dead_step:
            continue

        def change(step: float) -> float:
            return sum(exact_step_change(t, step, lam, mu, theta_n, a_n) for t, lam in zip(terms, lams))

        d, delta = expand_step(change, d, lo, hi, params)
        total += delta
        for s, t in zip(states, terms):
            apply_step(s, n, d, t)
        max_step = max(max_step, abs(d))
        accepted += 1
    return total, max_step, accepted


def _guarded_sweep(
    states: Sequence[LocalState],
    a: np.ndarray,
    mu: float,
    omega: float,
    params: SolverParams,
    sweep: int,
    use_duals: bool,
) -> tuple[SweepRecord, float]:
    """
    Sweep with omega doubling: a sweep that raises the exact objective is rolled
    back and retried with twice the omega, at most omega_max_doublings times.
    """
    order = _coordinate_order(len(states[0].theta), params, states[0].ap_index, sweep)
    snaps = [s.snapshot() for s in states]
    retries = 0
    while True:
        change, max_step, accepted = _sweep_states(states, a, mu, omega, params, order, use_duals)
        if not params.adaptive_omega or change <= params.descent_tol:
            break
        for s, snap in zip(states, snaps):
            s.restore(snap)
        if retries >= params.omega_max_doublings:
            logger.warning(
                "ap=%d sweep=%d omega=%.3g ascent persisted after %d doublings; sweep skipped",
                states[0].ap_index,
                sweep,
                omega,
                retries,
            )
            change, max_step, accepted = 0.0, 0.0, 0
            break
        omega = 2.0 * omega if omega > 0.0 else 1.0
        retries += 1

    record = SweepRecord(
        sweep=sweep,
        omega=omega,
        objective_change=change,
        max_step=max_step,
        accepted_steps=accepted,
        retries=retries,
    )
    logger.debug(
        "ap=%d sweep=%d omega=%.3g change=%.3e max_step=%.3e accepted=%d",
        states[0].ap_index,
        sweep,
        omega,
        change,
        max_step,
        accepted,
    )
    return record, omega


def cd_sweep(state: LocalState, a: np.ndarray, params: SolverParams) -> SweepRecord:
    """One pass over all coordinates of the per-AP subproblem."""
    omega = state.omega if state.omega is not None else params.omega
    record, state.omega = _guarded_sweep([state], a, params.mu, omega, params, state.sweeps, True)
    state.trace.append(record)
    state.sweeps += 1
    if state.sweeps % params.refactor_every == 0:
        refactorize(state)
    return record


def local_objective(state: LocalState, a: np.ndarray, params: SolverParams) -> float:
    """
    log|C| + u^H C^{-1} u + lambda^T (theta - a) + mu/2 ||theta - a||^2.

    The constant LK log(pi) is left out.
    """
    if state.dim > params.oracle_cap:
        raise OracleCapError(f"LK={state.dim} exceeds oracle cap {params.oracle_cap}")
    C = covariance_dense(state)
    factor = linalg.cho_factor(C, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(factor[0])))))
    u = _fresh_residual(state)
    quad = float(np.real(np.vdot(u, linalg.cho_solve(factor, u))))
    gap = state.theta - np.asarray(a, dtype=float)
    return logdet + quad + float(state.lambda_dual @ gap) + params.mu / 2.0 * float(gap @ gap)


@dataclass(frozen=True)
class CentralizedResult:
    a: np.ndarray
    history: tuple[np.ndarray, ...]
    sweeps: int
    trace: tuple[SweepRecord, ...]


def centralized_cd(
    y_all: Sequence[ReceivedSignal],
    scenario: Scenario,
    params: SolverParams,
    max_sweeps: Optional[int] = None,
) -> CentralizedResult:
    """
    Coordinate descent on the full negative log-likelihood summed over APs.

    Per coordinate, the per-AP quartic coefficients (no duals, no penalty) are
    summed, the summed quartic is minimized and the step is applied to every AP.
    """
    max_sweeps = max_sweeps if max_sweeps is not None else params.centralized_max_sweeps
    N = scenario.cfg.n_devices
    S = scenario.signatures.S
    states = [
        init_local_state(y, scenario.stats_row(m), S, np.zeros(N), np.zeros(N), ap_index=m)
        for m, y in enumerate(y_all)
    ]
    zeros = np.zeros(N)
    omega = params.omega
    history: list[np.ndarray] = []
    trace: list[SweepRecord] = []
    sweeps = 0
    for sweep in range(max_sweeps):
        prev = states[0].theta.copy()
        record, omega = _guarded_sweep(states, zeros, 0.0, omega, params, sweep, False)
        trace.append(record)
        sweeps = sweep + 1
        if sweeps % params.refactor_every == 0:
            for s in states:
                refactorize(s)
        history.append(states[0].theta.copy())
        if float(np.max(np.abs(states[0].theta - prev))) < params.centralized_tol:
            break
    logger.debug("centralized sweeps=%d omega=%.3g", sweeps, omega)
    return CentralizedResult(a=states[0].theta.copy(), history=tuple(history), sweeps=sweeps, trace=tuple(trace))
