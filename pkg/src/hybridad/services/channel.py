"""Per-(AP, device) channel statistics, channel sampling and received-signal synthesis."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from hybridad.config.settings import settings
from hybridad.errors import OracleCapError
from hybridad.models.domain import (
    ActivityVector,
    ChannelStats,
    ComplexArray,
    FieldRegion,
    Placement,
    ReceivedSignal,
    Scenario,
    SignatureMatrix,
    XFactor,
)
from hybridad.models.schemas import ScenarioConfig
from hybridad.services.scenario import (
    DISTANCE_FLOOR_M,
    classify_field,
    generate_scenario,
    path_loss_db,
    wrap_displacement,
    wrap_distance,
)

logger = logging.getLogger("hybridad.channel")

CHANNEL_DUMP_VERSION = 1
CHANNEL_DUMP_MAX_ENTRIES = 100_000


def large_scale_gain(distance_m: float, cfg: ScenarioConfig) -> float:
    """tx_power * 10^(-PL/10), linear watts, with the 1 m distance floor."""
    tau_km = max(distance_m, DISTANCE_FLOOR_M) / 1000.0
    return cfg.tx_power * 10.0 ** (-path_loss_db(tau_km) / 10.0)


def _element_positions(ap: np.ndarray, axis: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    K = cfg.n_antennas
    offsets = (np.arange(K) - (K - 1) / 2.0) * (cfg.lambda_c / 2.0)
    return ap[None, :] + offsets[:, None] * axis[None, :]


def _point_element_distances(
    point, ap: np.ndarray, axis: np.ndarray, cfg: ScenarioConfig
) -> tuple[np.ndarray, float]:
    disp = wrap_displacement(ap, point, cfg.area_side)
    image = ap + disp
    elements = _element_positions(ap, axis, cfg)
    r = np.linalg.norm(image[None, :] - elements, axis=1)
    return r, float(np.hypot(disp[0], disp[1]))


def element_distances(device, ap_index: int, placement: Placement, cfg: ScenarioConfig) -> tuple[np.ndarray, float]:
    """
    Distances from a device to each of the K elements of AP `ap_index`, plus the
    distance r0 to the array center.

    Elements sit at half-wavelength spacing along array_axis, centered on the AP.
    The device is first moved to its nearest wrap-around image.
    """
    ap = placement.ap_positions[ap_index]
    return _point_element_distances(device, ap, placement.array_axis, cfg)


def array_response(r: np.ndarray, r0: float, lambda_c: float) -> ComplexArray:
    return np.exp(-1j * 2.0 * np.pi / lambda_c * (np.asarray(r, dtype=float) - r0))


def build_channel_stats(m: int, n: int, placement: Placement, cfg: ScenarioConfig) -> ChannelStats:
    device = placement.device_positions[n]
    ap = placement.ap_positions[m]
    K = cfg.n_antennas
    r, r0 = element_distances(device, m, placement, cfg)

    if classify_field(device, m, placement, cfg) is FieldRegion.FAR:
        g = large_scale_gain(r0, cfg)
        return ChannelStats(
            ap=m,
            device=n,
            field=FieldRegion.FAR,
            mean=np.zeros(K, dtype=complex),
            cov_factor=np.sqrt(g) * np.eye(K, dtype=complex),
            gain_g=g,
        )

    beta = np.sqrt(large_scale_gain(r0, cfg))
    mean = beta * array_response(r, r0, cfg.lambda_c)

    columns = []
    sigma = np.sqrt(cfg.sigma_scatter_sq)
    for sc in placement.scatterer_positions[m]:
        # two-hop distance device -> scatterer -> AP
        tau = wrap_distance(device, sc, cfg.area_side) + wrap_distance(sc, ap, cfg.area_side)
        nlos_amp = np.sqrt(large_scale_gain(tau, cfg))
        r_sc, r0_sc = _point_element_distances(sc, ap, placement.array_axis, cfg)
        columns.append(sigma * nlos_amp * array_response(r_sc, r0_sc, cfg.lambda_c))

    return ChannelStats(
        ap=m,
        device=n,
        field=FieldRegion.NEAR,
        mean=mean,
        cov_factor=np.column_stack(columns),
    )


def build_stats_grid(placement: Placement, cfg: ScenarioConfig) -> tuple[tuple[ChannelStats, ...], ...]:
    return tuple(
        tuple(build_channel_stats(m, n, placement, cfg) for n in range(cfg.n_devices))
        for m in range(len(placement.ap_positions))
    )


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    placement, signatures, truth = generate_scenario(cfg)
    return Scenario(
        cfg=cfg,
        placement=placement,
        signatures=signatures,
        truth=truth,
        stats=build_stats_grid(placement, cfg),
    )


def _standard_cn(rng: np.random.Generator, size) -> ComplexArray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def sample_channel(stats: ChannelStats, rng: np.random.Generator) -> ComplexArray:
    """h = mean + B z with z ~ CN(0, I_J)."""
    z = _standard_cn(rng, stats.rank_J)
    return stats.mean + stats.cov_factor @ z


def sample_channels(scenario: Scenario, rng: np.random.Generator) -> list[list[ComplexArray]]:
    # every (m, n) pair is drawn in fixed order so the stream does not depend on activity
    return [[sample_channel(st, rng) for st in row] for row in scenario.stats]


def synthesize_received(
    scenario: Scenario,
    truth: ActivityVector,
    rng: np.random.Generator,
    noise_rng: np.random.Generator | None = None,
    noise: bool = True,
) -> list[ReceivedSignal]:
    """y_m = sum_n a_n (h_{m,n} kron s_n) + w_m, one fresh channel draw per call."""
    noise_rng = noise_rng if noise_rng is not None else rng
    S = scenario.signatures.S
    L = S.shape[0]
    K = scenario.cfg.n_antennas
    channels = sample_channels(scenario, rng)
    out = []
    for m, row in enumerate(channels):
        y = np.zeros(L * K, dtype=complex)
        for n, h in enumerate(row):
            if truth[n] != 0:
                y += truth[n] * np.kron(h, S[:, n])
        if noise:
            y += np.sqrt(scenario.noise_var) * _standard_cn(noise_rng, L * K)
        out.append(ReceivedSignal(y=y, noise_var=scenario.noise_var))
    return out


def model_mean_cov(
    theta: np.ndarray,
    stats_row: Sequence[ChannelStats],
    S: np.ndarray,
    noise_var: float,
    oracle_cap: int | None = None,
) -> tuple[ComplexArray, ComplexArray]:
    """
    Dense model moments for one AP (tests and oracles only).

    mean = sum_n theta_n h_bar_n kron s_n
    cov  = sum_n theta_n Xi_n kron (s_n s_n^H) + noise_var I
    """
    cap = oracle_cap if oracle_cap is not None else settings.oracle_cap
    L = S.shape[0]
    K = stats_row[0].mean.shape[0]
    LK = L * K
    if LK > cap:
        raise OracleCapError(f"LK={LK} exceeds oracle cap {cap}")
    mean = np.zeros(LK, dtype=complex)
    cov = noise_var * np.eye(LK, dtype=complex)
    for st in stats_row:
        t = float(theta[st.device])
        if t == 0.0:
            continue
        x = XFactor.from_stats(st, S[:, st.device])
        mean += t * x.mean_part
        cov += t * x.outer()
    return mean, cov


def dump_channels(scenario: Scenario, rng: np.random.Generator, path: Path) -> Path:
    """Write one channel draw per (AP, device) as JSON [re, im] pairs."""
    cfg = scenario.cfg
    entries = cfg.n_aps * cfg.n_devices * cfg.n_antennas
    if entries > CHANNEL_DUMP_MAX_ENTRIES:
        raise OracleCapError(f"channel dump of {entries} entries exceeds {CHANNEL_DUMP_MAX_ENTRIES}")
    channels = sample_channels(scenario, rng)
    payload = {
        "version": CHANNEL_DUMP_VERSION,
        "seed": cfg.seed,
        "shape": [cfg.n_aps, cfg.n_devices, cfg.n_antennas],
        "fields": [[st.field.value for st in row] for row in scenario.stats],
        "channels": [[[[float(v.real), float(v.imag)] for v in h] for h in row] for row in channels],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    return path
