from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import numpy.typing as npt

from hybridad.models.schemas import ScenarioConfig

RealArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]

# entries in {0,1} for ground truth, [0,1] for estimates
ActivityVector = RealArray


class FieldRegion(str, Enum):
    NEAR = "near"
    FAR = "far"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Placement:
    ap_positions: RealArray  # (M, 2)
    device_positions: RealArray  # (N, 2)
    scatterer_positions: RealArray  # (M, L_m, 2)
    array_axis: RealArray  # (2,) unit vector

    def __post_init__(self) -> None:
        for name in ("ap_positions", "device_positions", "scatterer_positions", "array_axis"):
            _frozen(getattr(self, name))


@dataclass(frozen=True)
class SignatureMatrix:
    S: ComplexArray  # (L, N)

    def __post_init__(self) -> None:
        _frozen(self.S)


@dataclass(frozen=True)
class ChannelStats:
    """
    Second-order description of h_{m,n}.

    Far:  mean = 0, cov_factor = sqrt(g) I_K.
    Near: mean = beta * b(r), cov_factor column l = sigma_l |beta~_l| b(r~_l).
    """

    ap: int
    device: int
    field: FieldRegion
    mean: ComplexArray  # (K,)
    cov_factor: ComplexArray  # (K, J)
    gain_g: Optional[float] = None

    def __post_init__(self) -> None:
        _frozen(self.mean)
        _frozen(self.cov_factor)

    @property
    def rank_J(self) -> int:
        return int(self.cov_factor.shape[1])

    @property
    def covariance(self) -> ComplexArray:
        B = self.cov_factor
        return B @ B.conj().T


@dataclass(frozen=True)
class XFactor:
    """
    X = B kron s (LK x J) with X X^H = Xi kron (s s^H).

    X is kept as the pair (B, s); products with it go through reshapes so the
    LK x J matrix only exists when dense() is called.
    """

    device: int
    cov_part: ComplexArray  # (K, J)
    signature: ComplexArray  # (L,)
    mean_part: ComplexArray  # (LK,) = h_bar kron s
    near: bool

    @classmethod
    def from_stats(cls, stats: ChannelStats, signature: ComplexArray) -> "XFactor":
        return cls(
            device=stats.device,
            cov_part=stats.cov_factor,
            signature=np.asarray(signature, dtype=complex),
            mean_part=np.kron(stats.mean, signature),
            near=stats.field is FieldRegion.NEAR,
        )

    @property
    def rank(self) -> int:
        return int(self.cov_part.shape[1])

    @property
    def dim(self) -> int:
        return int(self.cov_part.shape[0] * self.signature.shape[0])

    def dense(self) -> ComplexArray:
        return np.kron(self.cov_part, self.signature[:, None])

    def matvec(self, w: ComplexArray) -> ComplexArray:
        """X @ w."""
        return np.kron(self.cov_part @ w, self.signature)

    def rmatvec(self, v: ComplexArray) -> ComplexArray:
        """X^H @ v."""
        K, L = self.cov_part.shape[0], self.signature.shape[0]
        return self.cov_part.conj().T @ (v.reshape(K, L) @ self.signature.conj())

    def left_product(self, mat: ComplexArray) -> ComplexArray:
        """mat @ X for an (R, LK) matrix."""
        K, L = self.cov_part.shape[0], self.signature.shape[0]
        return (mat.reshape(mat.shape[0], K, L) @ self.signature) @ self.cov_part

    def gram(self, mat_x: ComplexArray) -> ComplexArray:
        """X^H @ mat_x for an (LK, R) matrix, e.g. X^H C^{-1} X from C^{-1} X."""
        K, L = self.cov_part.shape[0], self.signature.shape[0]
        folded = np.einsum("klr,l->kr", mat_x.reshape(K, L, -1), self.signature.conj())
        return self.cov_part.conj().T @ folded

    def outer(self) -> ComplexArray:
        """X X^H = Xi kron (s s^H), dense LK x LK."""
        s = self.signature
        return np.kron(self.cov_part @ self.cov_part.conj().T, np.outer(s, s.conj()))


@dataclass(frozen=True)
class ReceivedSignal:
    y: ComplexArray  # (LK,) = vec(Y_m), column-major
    noise_var: float


@dataclass(frozen=True)
class Scenario:
    """One coherence block: geometry, signatures, truth and per-(AP, device) stats."""

    cfg: ScenarioConfig
    placement: Placement
    signatures: SignatureMatrix
    truth: ActivityVector
    stats: tuple[tuple[ChannelStats, ...], ...]  # [m][n]

    @property
    def noise_var(self) -> float:
        return self.cfg.noise_var

    def stats_row(self, m: int) -> tuple[ChannelStats, ...]:
        return self.stats[m]


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class FronthaulRecord:
    direction: Direction
    iteration: int
    ap_index: int  # -1 for a broadcast
    payload_len: int


@dataclass(frozen=True)
class TrialResult:
    a_cont: ActivityVector
    truth: ActivityVector
    iterations_used: int
    wall_time: float
    # a after each outer iteration (distributed) or sweep (centralized)
    history: tuple[ActivityVector, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class RocCurve:
    points: list[tuple[float, float, float]]  # (gamma, pm, pf)
    eer: float
    gamma_eer: float
    crossed: bool = True
    eer_stderr: float = 0.0
