"""Global test fixtures."""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from hybridad.models.domain import (  # noqa: E402
    ChannelStats,
    FieldRegion,
    Placement,
    ReceivedSignal,
    Scenario,
    SignatureMatrix,
)
from hybridad.models.schemas import ScenarioConfig  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run paper-scale Monte-Carlo checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _no_registry(monkeypatch, tmp_path):
    # keep run_experiment away from the developer's DuckDB file
    from hybridad.config.settings import settings

    monkeypatch.setattr(settings, "db_url", f"duckdb:///{tmp_path / 'registry.duckdb'}")
    monkeypatch.setattr(settings, "record_runs", False)
    yield


def qpsk(rng: np.random.Generator, L: int, N: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(L, N, 2))
    sym = (2 * bits - 1) * (np.sqrt(2.0) / 2.0)
    return sym[..., 0] + 1j * sym[..., 1]


def synthetic_row(
    rng: np.random.Generator,
    N: int,
    K: int,
    Lm: int,
    near_mask: np.ndarray,
    ap: int = 0,
    scale: float = 0.4,
) -> tuple[ChannelStats, ...]:
    """Random stats with controlled near/far mix; magnitudes keep X^H C^{-1} X moderate for unit noise."""
    row = []
    for n in range(N):
        if near_mask[n]:
            mean = scale * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
            B = scale * (rng.standard_normal((K, Lm)) + 1j * rng.standard_normal((K, Lm))) / np.sqrt(2.0)
            row.append(ChannelStats(ap, n, FieldRegion.NEAR, mean, B))
        else:
            g = float(scale**2 * rng.uniform(0.5, 1.5))
            row.append(ChannelStats(ap, n, FieldRegion.FAR, np.zeros(K, dtype=complex), np.sqrt(g) * np.eye(K, dtype=complex), g))
    return tuple(row)


def sample_received(rng, row, S, truth, noise_var) -> ReceivedSignal:
    L, K = S.shape[0], row[0].mean.shape[0]
    y = np.sqrt(noise_var) * (rng.standard_normal(L * K) + 1j * rng.standard_normal(L * K)) / np.sqrt(2.0)
    for st in row:
        if truth[st.device]:
            z = (rng.standard_normal(st.rank_J) + 1j * rng.standard_normal(st.rank_J)) / np.sqrt(2.0)
            h = st.mean + st.cov_factor @ z
            y = y + truth[st.device] * np.kron(h, S[:, st.device])
    return ReceivedSignal(y=y, noise_var=noise_var)


@pytest.fixture
def make_instance():
    """
    Single-AP synthetic instance (K=4, L=3, N=8, L_m=2 by default), half near-field.

    Returns (row, S, y, truth).
    """

    def _make(seed: int = 0, N: int = 8, K: int = 4, L: int = 3, Lm: int = 2, near_mask=None, noise_var: float = 1.0, scale: float = 0.4):
        rng = np.random.default_rng(seed)
        mask = np.arange(N) % 2 == 0 if near_mask is None else np.asarray(near_mask, dtype=bool)
        row = synthetic_row(rng, N, K, Lm, mask, scale=scale)
        S = qpsk(rng, L, N)
        truth = np.zeros(N)
        truth[rng.choice(N, size=max(1, N // 4), replace=False)] = 1.0
        y = sample_received(rng, row, S, truth, noise_var)
        return row, S, y, truth

    return _make


@pytest.fixture
def make_scenario():
    """Multi-AP synthetic Scenario plus received signals: (scenario, y_all)."""

    def _make(seed: int = 0, N: int = 8, M: int = 2, K: int = 4, L: int = 3, Lm: int = 2, noise_var: float = 1.0):
        rng = np.random.default_rng(seed)
        cfg = ScenarioConfig(
            n_devices=N,
            n_aps=M,
            n_antennas=K,
            seq_len=L,
            n_scatterers=Lm,
            active_ratio=0.25,
            seed=seed,
            noise_power_dbm=10.0 * np.log10(noise_var) + 30.0,
        )
        S = qpsk(rng, L, N)
        truth = np.zeros(N)
        truth[rng.choice(N, size=cfg.n_active, replace=False)] = 1.0
        stats = tuple(synthetic_row(rng, N, K, Lm, rng.random(N) < 0.5, ap=m) for m in range(M))
        placement = Placement(
            ap_positions=np.zeros((M, 2)),
            device_positions=np.zeros((N, 2)),
            scatterer_positions=np.zeros((M, Lm, 2)),
            array_axis=np.array([1.0, 0.0]),
        )
        scenario = Scenario(cfg=cfg, placement=placement, signatures=SignatureMatrix(S), truth=truth, stats=stats)
        y_all = [sample_received(rng, stats[m], S, truth, scenario.noise_var) for m in range(M)]
        return scenario, y_all

    return _make
