"""
Identifiability diagnostics.

psi_{m,n} = vec(X_{m,n} X_{m,n}^H) = vec(Xi_{m,n} kron s_n s_n^H). Pairwise cosines
of these columns factor into a covariance trace ratio times a squared signature
cosine, and the trace ratio never exceeds 1 (Cauchy-Schwarz on PSD matrices).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from hybridad.config.settings import settings
from hybridad.errors import OracleCapError
from hybridad.models.domain import ChannelStats, FieldRegion, Scenario, XFactor
from hybridad.services.rng import substream

logger = logging.getLogger("hybridad.analysis")

BOUND_SLACK = 1e-12
NULL_RTOL = 1e-10
PROPORTIONAL_TOL = 1e-8

PAIR_TYPES = ("near-near", "near-far", "far-far")


@dataclass(frozen=True)
class PsiColumn:
    device: int
    column: np.ndarray  # (LK)^2, column-major vec of X X^H
    xi_fro: float
    sig_sq_norm: float

    @property
    def expected_norm(self) -> float:
        return self.xi_fro * self.sig_sq_norm


def psi_column(x: XFactor, oracle_cap: Optional[int] = None) -> PsiColumn:
    cap = oracle_cap if oracle_cap is not None else settings.oracle_cap
    if x.dim > cap:
        raise OracleCapError(f"LK={x.dim} exceeds oracle cap {cap}")
    B = x.cov_part
    return PsiColumn(
        device=x.device,
        column=x.outer().flatten(order="F"),
        xi_fro=float(np.linalg.norm(B.conj().T @ B)),
        sig_sq_norm=float(np.real(np.vdot(x.signature, x.signature))),
    )


def signature_bound(n: int, n2: int, S: np.ndarray) -> float:
    """(|s_n^H s_n'| / (||s_n|| ||s_n'||))^2."""
    s, t = S[:, n], S[:, n2]
    return float(abs(np.vdot(s, t)) ** 2 / (np.real(np.vdot(s, s)) * np.real(np.vdot(t, t))))


def trace_ratio(B1: np.ndarray, B2: np.ndarray) -> float:
    """tr(Xi Xi') / (||Xi||_F ||Xi'||_F) from factors Xi = B B^H."""
    g1 = np.linalg.norm(B1.conj().T @ B1)
    g2 = np.linalg.norm(B2.conj().T @ B2)
    if g1 == 0.0 or g2 == 0.0:
        raise ValueError("zero covariance factor")
    cross = np.linalg.norm(B1.conj().T @ B2) ** 2
    return float(cross / (g1 * g2))


def cosine_similarity(n: int, n2: int, stats_row: Sequence[ChannelStats], S: np.ndarray) -> float:
    if n == n2:
        raise ValueError("cosine_similarity needs two distinct devices")
    return trace_ratio(stats_row[n].cov_factor, stats_row[n2].cov_factor) * signature_bound(n, n2, S)


def is_proportional(B1: np.ndarray, B2: np.ndarray, tol: float = PROPORTIONAL_TOL) -> bool:
    X1 = B1 @ B1.conj().T
    X2 = B2 @ B2.conj().T
    return bool(np.linalg.norm(X1 / np.linalg.norm(X1) - X2 / np.linalg.norm(X2)) < tol)


def pair_type(f1: FieldRegion, f2: FieldRegion) -> str:
    near = (f1 is FieldRegion.NEAR) + (f2 is FieldRegion.NEAR)
    return PAIR_TYPES[2 - near]


@dataclass(frozen=True)
class PairRow:
    ap: int
    device: int
    other: int
    pair_type: str
    similarity: float
    bound: float
    proportional: bool

    @property
    def ratio(self) -> float:
        return self.similarity / self.bound if self.bound > 0 else 1.0


@dataclass(frozen=True)
class PairTypeSummary:
    pair_type: str
    count: int
    mean_similarity: float
    max_similarity: float
    mean_ratio: float


@dataclass(frozen=True)
class PairSimilarityReport:
    rows: tuple[PairRow, ...]
    summary: tuple[PairTypeSummary, ...]
    violations: int

    def to_dict(self) -> dict:
        return {
            "pairs": len(self.rows),
            "violations": self.violations,
            "by_type": {
                s.pair_type: {
                    "count": s.count,
                    "mean_similarity": s.mean_similarity,
                    "max_similarity": s.max_similarity,
                    "mean_ratio": s.mean_ratio,
                }
                for s in self.summary
            },
        }


def _summarize(rows: Sequence[PairRow]) -> tuple[PairTypeSummary, ...]:
    out = []
    for kind in PAIR_TYPES:
        sel = [r for r in rows if r.pair_type == kind]
        if not sel:
            continue
        sims = np.array([r.similarity for r in sel])
        out.append(
            PairTypeSummary(
                pair_type=kind,
                count=len(sel),
                mean_similarity=float(np.mean(sims)),
                max_similarity=float(np.max(sims)),
                mean_ratio=float(np.mean([r.ratio for r in sel])),
            )
        )
    return tuple(out)


def proposition1_sweep(scenario: Scenario, num_pairs: int, strict: bool = True) -> PairSimilarityReport:
    """
    Sample (AP, n, n') triples and check similarity <= signature bound for each.

    Raises AssertionError on a violation beyond BOUND_SLACK when strict.
    """
    N = scenario.cfg.n_devices
    if N < 2:
        raise ValueError("proposition1_sweep needs at least two devices")
    M = len(scenario.stats)
    S = scenario.signatures.S
    rng = substream(scenario.cfg.seed, "pairs")
    rows = []
    violations = 0
    for _ in range(num_pairs):
        m = int(rng.integers(M))
        n, n2 = (int(v) for v in rng.choice(N, size=2, replace=False))
        row = scenario.stats_row(m)
        sim = cosine_similarity(n, n2, row, S)
        bound = signature_bound(n, n2, S)
        if sim > bound + BOUND_SLACK:
            violations += 1
            logger.error("ap=%d n=%d n2=%d similarity=%.17g bound=%.17g", m, n, n2, sim, bound)
        rows.append(
            PairRow(
                ap=m,
                device=n,
                other=n2,
                pair_type=pair_type(row[n].field, row[n2].field),
                similarity=sim,
                bound=bound,
                proportional=is_proportional(row[n].cov_factor, row[n2].cov_factor),
            )
        )
    if strict and violations:
        raise AssertionError(f"{violations} pairs exceed the signature bound")
    report = PairSimilarityReport(rows=tuple(rows), summary=_summarize(rows), violations=violations)
    logger.info("pair sweep pairs=%d violations=%d", len(rows), violations)
    return report


@dataclass(frozen=True)
class NullspaceReport:
    shape: tuple[int, int]
    rank: int
    null_dim: int
    sigma_max: float
    sigma_min: float
    sign_feasible: bool
    null_basis: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "rank": self.rank,
            "null_dim": self.null_dim,
            "sigma_max": self.sigma_max,
            "sigma_min": self.sigma_min,
            "sign_feasible": self.sign_feasible,
        }


def stacked_psi(scenario: Scenario, stats_rows=None, cap: Optional[int] = None) -> np.ndarray:
    """Real embedding [Re; Im] of all Psi_m stacked vertically, shape (2 M (LK)^2, N)."""
    rows = stats_rows if stats_rows is not None else scenario.stats
    cap = cap if cap is not None else settings.nullspace_cap
    S = scenario.signatures.S
    N = S.shape[1]
    LK = S.shape[0] * rows[0][0].mean.shape[0]
    entries = 2 * len(rows) * LK * LK * N
    if entries > cap:
        raise OracleCapError(f"stacked Psi has {entries} entries, cap is {cap}")
    blocks = []
    for row in rows:
        cols = [XFactor.from_stats(st, S[:, st.device]).outer().flatten(order="F") for st in row]
        psi = np.stack(cols, axis=1)
        blocks.extend([psi.real, psi.imag])
    return np.vstack(blocks)


def _sign_feasible(V: np.ndarray, truth: np.ndarray) -> bool:
    """
    Is there xi = V c with xi_n >= 0 where truth is 0, xi_n <= 0 where truth is 1,
    normalized to sum_n sign_n xi_n = 1?
    """
    sign = np.where(np.asarray(truth) == 1, -1.0, 1.0)
    A_ub = -(sign[:, None] * V)
    b_ub = np.zeros(V.shape[0])
    A_eq = (sign @ V)[None, :]
    res = optimize.linprog(
        c=np.zeros(V.shape[1]),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=np.ones(1),
        bounds=[(None, None)] * V.shape[1],
        method="highs",
    )
    return res.status == 0


def nullspace_probe(
    scenario: Scenario,
    stats_rows=None,
    truth: Optional[np.ndarray] = None,
    cap: Optional[int] = None,
) -> NullspaceReport:
    psi = stacked_psi(scenario, stats_rows, cap)
    _, sv, vh = linalg.svd(psi, full_matrices=False)
    N = psi.shape[1]
    sigma_max = float(sv[0]) if sv.size else 0.0
    rank = int(np.sum(sv > NULL_RTOL * sigma_max)) if sigma_max > 0 else 0
    null_basis = linalg.null_space(vh[:rank]) if rank > 0 else np.eye(N)  # (N, N - rank)
    full = np.zeros(N)
    full[: sv.size] = sv
    sigma_min = float(full[-1])

    truth = scenario.truth if truth is None else truth
    feasible = _sign_feasible(null_basis, truth) if null_basis.shape[1] > 0 else False
    logger.info("nullspace shape=%s rank=%d null_dim=%d sigma_min=%.3e", psi.shape, rank, N - rank, sigma_min)
    return NullspaceReport(
        shape=(int(psi.shape[0]), N),
        rank=rank,
        null_dim=N - rank,
        sigma_max=sigma_max,
        sigma_min=sigma_min,
        sign_feasible=feasible,
        null_basis=null_basis,
    )


PAIR_FIELDS = ["ap", "device", "other", "pair_type", "similarity", "bound", "proportional"]


def pair_rows(report: PairSimilarityReport) -> list[dict]:
    return [
        {
            "ap": r.ap,
            "device": r.device,
            "other": r.other,
            "pair_type": r.pair_type,
            "similarity": r.similarity,
            "bound": r.bound,
            "proportional": int(r.proportional),
        }
        for r in report.rows
    ]
