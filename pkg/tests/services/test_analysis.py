from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from hybridad.errors import OracleCapError
from hybridad.models.domain import ChannelStats, FieldRegion, SignatureMatrix, XFactor
from hybridad.models.schemas import ScenarioConfig
from hybridad.services.analysis import (
    PAIR_FIELDS,
    cosine_similarity,
    is_proportional,
    nullspace_probe,
    pair_rows,
    pair_type,
    proposition1_sweep,
    psi_column,
    signature_bound,
    trace_ratio,
)
from hybridad.services.channel import build_scenario
from tests.conftest import qpsk


def _far(n: int, K: int, g: float) -> ChannelStats:
    return ChannelStats(0, n, FieldRegion.FAR, np.zeros(K, dtype=complex), np.sqrt(g) * np.eye(K, dtype=complex), g)


def _near(n: int, B: np.ndarray) -> ChannelStats:
    return ChannelStats(0, n, FieldRegion.NEAR, np.zeros(B.shape[0], dtype=complex), B)


def _rand_factor(rng, K: int, J: int) -> np.ndarray:
    return rng.standard_normal((K, J)) + 1j * rng.standard_normal((K, J))


def test_far_far_pairs_attain_the_signature_bound() -> None:
    rng = np.random.default_rng(0)
    S = qpsk(rng, 6, 2)
    row = (_far(0, 4, 1e-9), _far(1, 4, 3e-11))
    assert cosine_similarity(0, 1, row, S) == pytest.approx(signature_bound(0, 1, S), rel=1e-12)


def test_proportional_covariances_attain_the_bound() -> None:
    rng = np.random.default_rng(1)
    S = qpsk(rng, 6, 2)
    B = _rand_factor(rng, 5, 2)
    row = (_near(0, B), _near(1, 3.0 * B))
    assert is_proportional(B, 3.0 * B)
    assert cosine_similarity(0, 1, row, S) == pytest.approx(signature_bound(0, 1, S), rel=1e-12)


def test_trace_ratio_is_at_most_one() -> None:
    rng = np.random.default_rng(2)
    for _ in range(200):
        B1 = _rand_factor(rng, 6, int(rng.integers(1, 4)))
        B2 = _rand_factor(rng, 6, int(rng.integers(1, 4)))
        assert 0.0 <= trace_ratio(B1, B2) <= 1.0 + 1e-12
        assert not is_proportional(B1, B2)


def test_trace_ratio_rejects_zero_factor() -> None:
    with pytest.raises(ValueError):
        trace_ratio(np.zeros((3, 2)), np.ones((3, 2)))


def test_cosine_similarity_needs_two_devices() -> None:
    rng = np.random.default_rng(3)
    row = (_far(0, 2, 1.0),)
    with pytest.raises(ValueError):
        cosine_similarity(0, 0, row, qpsk(rng, 2, 1))


def test_closed_form_matches_dense_vec_cosine() -> None:
    rng = np.random.default_rng(4)
    K, L = 4, 3
    S = qpsk(rng, L, 2)
    row = (_near(0, _rand_factor(rng, K, 2)), _near(1, _rand_factor(rng, K, 3)))
    p0 = psi_column(XFactor.from_stats(row[0], S[:, 0]))
    p1 = psi_column(XFactor.from_stats(row[1], S[:, 1]))
    dense = abs(np.vdot(p0.column, p1.column)) / (np.linalg.norm(p0.column) * np.linalg.norm(p1.column))
    assert cosine_similarity(0, 1, row, S) == pytest.approx(dense, rel=1e-10)


def test_psi_column_norm_factorizes() -> None:
    rng = np.random.default_rng(5)
    S = qpsk(rng, 4, 1)
    p = psi_column(XFactor.from_stats(_near(0, _rand_factor(rng, 3, 2)), S[:, 0]))
    assert p.column.shape == (144,)
    assert np.linalg.norm(p.column) == pytest.approx(p.expected_norm, rel=1e-12)
    # unit-modulus QPSK: ||s||^2 = L
    assert p.sig_sq_norm == pytest.approx(4.0)


def test_psi_column_respects_oracle_cap() -> None:
    rng = np.random.default_rng(6)
    x = XFactor.from_stats(_far(0, 4, 1.0), qpsk(rng, 3, 1)[:, 0])
    with pytest.raises(OracleCapError):
        psi_column(x, oracle_cap=11)


def test_pair_type_labels() -> None:
    assert pair_type(FieldRegion.NEAR, FieldRegion.NEAR) == "near-near"
    assert pair_type(FieldRegion.FAR, FieldRegion.NEAR) == "near-far"
    assert pair_type(FieldRegion.FAR, FieldRegion.FAR) == "far-far"


def test_random_pairs_never_exceed_the_bound() -> None:
    cfg = ScenarioConfig(n_devices=60, n_aps=3, n_antennas=24, seq_len=6, n_scatterers=8, seed=12)
    report = proposition1_sweep(build_scenario(cfg), num_pairs=1000)
    assert report.violations == 0
    assert len(report.rows) == 1000
    for r in report.rows:
        assert r.similarity <= r.bound + 1e-12
    by_type = report.to_dict()["by_type"]
    assert sum(v["count"] for v in by_type.values()) == 1000
    if "far-far" in by_type:
        assert by_type["far-far"]["mean_ratio"] == pytest.approx(1.0)
    if "near-near" in by_type and "far-far" in by_type:
        assert by_type["near-near"]["mean_ratio"] <= by_type["far-far"]["mean_ratio"] + 1e-12

    rows = pair_rows(report)
    assert list(rows[0]) == PAIR_FIELDS


def test_pair_sweep_is_reproducible() -> None:
    scenario = build_scenario(ScenarioConfig(n_devices=20, n_antennas=8, seq_len=4, n_scatterers=3, seed=2))
    r1 = proposition1_sweep(scenario, 50)
    r2 = proposition1_sweep(scenario, 50)
    assert [(r.ap, r.device, r.other) for r in r1.rows] == [(r.ap, r.device, r.other) for r in r2.rows]


def test_nullspace_single_device_is_trivial(make_scenario) -> None:
    scenario, _ = make_scenario(seed=0, N=1, M=1)
    report = nullspace_probe(scenario, truth=np.zeros(1))
    assert report.rank == 1
    assert report.null_dim == 0
    assert not report.sign_feasible


def test_nullspace_of_generic_small_system_is_trivial(make_scenario) -> None:
    scenario, _ = make_scenario(seed=1, N=8, M=2)
    report = nullspace_probe(scenario)
    assert report.shape == (2 * 2 * 144, 8)
    assert report.null_dim == 0
    assert report.sigma_min > 0
    assert report.to_dict()["null_dim"] == 0


def test_duplicated_device_opens_a_sign_feasible_null_direction(make_scenario) -> None:
    scenario, _ = make_scenario(seed=2, N=6, M=2)
    S = scenario.signatures.S.copy()
    S[:, 1] = S[:, 0]
    stats = tuple(
        tuple(
            dataclasses.replace(row[0], device=1) if st.device == 1 else st
            for st in row
        )
        for row in scenario.stats
    )
    twin = dataclasses.replace(scenario, stats=stats, signatures=SignatureMatrix(S))
    truth = np.array([1.0, 0, 0, 0, 0, 0])
    report = nullspace_probe(twin, truth=truth)
    assert report.null_dim == 1
    v = report.null_basis[:, 0]
    v = v / v[0]
    np.testing.assert_allclose(v, [1, -1, 0, 0, 0, 0], atol=1e-8)
    assert report.sign_feasible


def test_nullspace_respects_cap(make_scenario) -> None:
    scenario, _ = make_scenario(seed=3)
    with pytest.raises(OracleCapError):
        nullspace_probe(scenario, cap=10)
