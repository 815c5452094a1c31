"""Seeded construction of the physical experiment."""

from __future__ import annotations

import logging
import math

import numpy as np

from hybridad.errors import ConfigError
from hybridad.models.domain import ActivityVector, FieldRegion, Placement, SignatureMatrix
from hybridad.models.schemas import ScenarioConfig
from hybridad.services.rng import substream

logger = logging.getLogger("hybridad.scenario")

# distances below this are clamped before path loss and bound the scatterer annulus
DISTANCE_FLOOR_M = 1.0

DEFAULT_AREA_SIDE = 200.0
DEFAULT_AP_RADIUS = 40.0


def wrap_displacement(p, q, side: float) -> np.ndarray:
    """Shortest vector from p to q on the torus of the given side."""
    delta = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    return delta - side * np.round(delta / side)


def wrap_distance(p, q, side: float) -> float:
    """Toroidal Euclidean distance; each axis delta is reduced to magnitude <= side/2."""
    if side <= 0:
        raise ValueError("side must be positive")
    d = wrap_displacement(p, q, side)
    return float(math.hypot(d[0], d[1]))


def wrap_point(p, side: float) -> np.ndarray:
    """Map a point back into [-side/2, side/2]^2."""
    p = np.asarray(p, dtype=float)
    return p - side * np.round(p / side)


def rayleigh_distance(K: int, lambda_c: float) -> float:
    """2 D^2 / lambda_c with aperture D = (K - 1) lambda_c / 2."""
    if K < 2 or lambda_c <= 0:
        raise ValueError("rayleigh_distance needs K >= 2 and lambda_c > 0")
    D = (K - 1) * lambda_c / 2.0
    return 2.0 * D * D / lambda_c


def path_loss_db(tau_km: float) -> float:
    if tau_km <= 0:
        raise ValueError("path loss distance must be positive (apply the floor first)")
    return 128.1 + 37.6 * math.log10(tau_km)


def default_ap_positions(cfg: ScenarioConfig) -> np.ndarray:
    """
    APs on a 40 m ring at angles 2*pi*m/M.

    For M=3 this is (40, 0), (-20, 20*sqrt(3)), (-20, -20*sqrt(3)).
    """
    if cfg.area_side != DEFAULT_AREA_SIDE:
        raise ConfigError(
            f"default AP layout assumes area_side={DEFAULT_AREA_SIDE:g}; give ap_positions explicitly",
            field="ap_positions",
        )
    angles = 2.0 * np.pi * np.arange(cfg.n_aps) / cfg.n_aps
    return DEFAULT_AP_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])


def _scatterers(ap: np.ndarray, cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    r_in = DISTANCE_FLOOR_M
    r_out = max(rayleigh_distance(cfg.n_antennas, cfg.lambda_c), 2.0 * DISTANCE_FLOOR_M)
    # uniform over the annulus area
    radius = np.sqrt(rng.uniform(r_in**2, r_out**2, size=cfg.n_scatterers))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_scatterers)
    pts = ap + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return np.array([wrap_point(p, cfg.area_side) for p in pts])


def generate_signatures(cfg: ScenarioConfig) -> SignatureMatrix:
    rng = substream(cfg.seed, "signatures")
    bits = rng.integers(0, 2, size=(cfg.seq_len, cfg.n_devices, 2))
    sym = (2 * bits - 1) * (math.sqrt(2.0) / 2.0)
    return SignatureMatrix(S=sym[..., 0] + 1j * sym[..., 1])


def generate_activity(cfg: ScenarioConfig) -> ActivityVector:
    rng = substream(cfg.seed, "activity")
    a = np.zeros(cfg.n_devices)
    a[rng.choice(cfg.n_devices, size=cfg.n_active, replace=False)] = 1.0
    return a


def generate_placement(cfg: ScenarioConfig) -> Placement:
    rng = substream(cfg.seed, "placement")
    half = cfg.area_side / 2.0
    if cfg.ap_positions is not None:
        aps = np.asarray(cfg.ap_positions, dtype=float)
    else:
        aps = default_ap_positions(cfg)
    devices = rng.uniform(-half, half, size=(cfg.n_devices, 2))
    scatterers = np.stack([_scatterers(ap, cfg, rng) for ap in aps])
    return Placement(
        ap_positions=aps,
        device_positions=devices,
        scatterer_positions=scatterers,
        array_axis=np.asarray(cfg.array_axis, dtype=float),
    )


def generate_scenario(cfg: ScenarioConfig) -> tuple[Placement, SignatureMatrix, ActivityVector]:
    """Placement, signatures and ground-truth activity, each from its own substream."""
    placement = generate_placement(cfg)
    signatures = generate_signatures(cfg)
    truth = generate_activity(cfg)
    logger.debug(
        "seed=%d N=%d M=%d active=%d rayleigh=%.2f",
        cfg.seed,
        cfg.n_devices,
        cfg.n_aps,
        int(truth.sum()),
        rayleigh_distance(cfg.n_antennas, cfg.lambda_c),
    )
    return placement, signatures, truth


def classify_field(device, ap_index: int, placement: Placement, cfg: ScenarioConfig) -> FieldRegion:
    """Near iff the wrap distance to the AP is <= the Rayleigh distance (ties are Near)."""
    dist = wrap_distance(device, placement.ap_positions[ap_index], cfg.area_side)
    if dist <= rayleigh_distance(cfg.n_antennas, cfg.lambda_c):
        return FieldRegion.NEAR
    return FieldRegion.FAR


def near_counts(placement: Placement, cfg: ScenarioConfig) -> list[int]:
    """|U_m| for each AP."""
    return [
        sum(
            classify_field(dev, m, placement, cfg) is FieldRegion.NEAR
            for dev in placement.device_positions
        )
        for m in range(len(placement.ap_positions))
    ]


def scenario_summary(cfg: ScenarioConfig) -> dict:
    """Audit view of a scenario: resolved config plus derived geometry."""
    placement, signatures, truth = generate_scenario(cfg)
    return {
        "config": cfg.model_dump(mode="json"),
        "rayleigh_distance_m": rayleigh_distance(cfg.n_antennas, cfg.lambda_c),
        "aperture_m": cfg.aperture,
        "noise_var_w": cfg.noise_var,
        "tx_power_w": cfg.tx_power,
        "ap_positions": placement.ap_positions.tolist(),
        "near_devices_per_ap": near_counts(placement, cfg),
        "active_devices": [int(i) for i in np.flatnonzero(truth)],
        "signature_shape": list(signatures.S.shape),
    }
