"""Synthetic RSSI and TDoA observations.

RSSI follows a log-distance model with the LOS or NLOS exponent of the
drawn link state and unit-power Rician fading. TDoA range differences get
Gaussian noise whose std scales as ``1/sqrt(SNR * beta * ln beta)``; the
overall constant is pinned so that a 100 m LOS link at 30 m altitude has
1 m ranging std.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .channel import SPEED_OF_LIGHT, ChannelParams, EtaTable
from .topology import Deployment

log = logging.getLogger(__name__)

SYNC_MODELS = ("common_cancel", "per_node_full")

# calibration anchor for the ranging-noise constant
KAPPA_ANCHOR_D3D = 100.0
KAPPA_ANCHOR_H = 30.0
KAPPA_ANCHOR_STD = 1.0

D_EST_MIN = 1.0
D_EST_MAX = 1e5


@dataclass(frozen=True)
class MeasurementConfig:
    channel: ChannelParams = field(default_factory=ChannelParams)
    sinr_interference_factor: float = 0.5
    nuisance_loss: float = 0.9
    sync_residual_std: float = 1e-9
    sync_common_std: float = 1e-6
    sync_model: str = "common_cancel"
    fading: bool = True
    tdoa_noise_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.sinr_interference_factor <= 1:
            raise ValueError("sinr_interference_factor must be in (0, 1]")
        if not 0 < self.nuisance_loss <= 1:
            raise ValueError("nuisance_loss must be in (0, 1]")
        if self.sync_model not in SYNC_MODELS:
            raise ValueError(f"sync_model must be one of {SYNC_MODELS}")
        if self.sync_residual_std < 0 or self.sync_common_std < 0 or self.tdoa_noise_scale < 0:
            raise ValueError("noise parameters must be non-negative")

    @property
    def kappa(self) -> float:
        """Ranging-noise constant in m * sqrt(Hz)."""
        ch = self.channel
        pl = ch.ref_pathloss_1m + 10.0 * channel.los_exponent(KAPPA_ANCHOR_H) * np.log10(KAPPA_ANCHOR_D3D)
        snr = db_to_linear(ch.tx_power - pl - ch.noise_floor)
        return KAPPA_ANCHOR_STD * float(np.sqrt(self._information(snr)))

    def _information(self, snr):
        b = self.channel.bandwidth
        return snr * self.sinr_interference_factor * self.nuisance_loss * b * np.log(b)


@dataclass(frozen=True)
class LinkObservation:
    node_id: int
    rssi: float
    d_est: float
    los_state: bool
    true_d3d: float
    snr: float
    true_d2d: float = float("nan")
    converged: bool = True


@dataclass(frozen=True)
class TdoaMeasurement:
    node_pair: tuple[int, int]
    range_diff: float
    noise_std: float


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def channel_altitude(h):
    """Height difference clipped into the channel model's validity range."""
    return np.clip(h, channel.H_MIN, channel.H_MAX)


def draw_los_state(d2d, h, delta_los: float, rng: np.random.Generator):
    p = np.clip(np.asarray(channel.los_probability(d2d, h)) + delta_los, 0.0, 1.0)
    return rng.random(p.shape) < p


def rician_power(k_factor, rng: np.random.Generator, size=None):
    """``|g|**2`` for a unit-mean-power Rician gain with K-factor ``k_factor``."""
    k = np.asarray(k_factor, dtype=float)
    if size is None:
        size = k.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        los_amp = np.where(np.isinf(k), 1.0, np.sqrt(k / (k + 1.0)))
        scat = np.where(np.isinf(k), 0.0, np.sqrt(1.0 / (k + 1.0)))
    z = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
    return np.abs(los_amp + scat * z) ** 2


def synthesize_rssi(d2d, h_link, los_state, cfg: MeasurementConfig, rng: np.random.Generator):
    """RSSI (dBm) and linear SNR for each link.

    ``h_link`` is the true UAV-to-node height difference; the exponent uses
    it clipped to the model's validity range.
    """
    d2d = np.asarray(d2d, dtype=float)
    h_link = np.asarray(h_link, dtype=float)
    los_state = np.asarray(los_state, dtype=bool)
    ch = cfg.channel
    h_ch = channel_altitude(h_link)
    eta = np.where(los_state, channel.los_exponent(h_ch), channel.nlos_exponent(h_ch))
    d3d = np.sqrt(d2d**2 + h_link**2)
    pl = channel.mean_path_loss_db(d2d, h_link, ch, eta=eta)
    if cfg.fading:
        k = np.where(los_state, ch.k_los, ch.k_nlos)
        fading_db = 10.0 * np.log10(rician_power(k, rng))
    else:
        fading_db = np.zeros_like(d3d)
    rssi = ch.tx_power - pl + fading_db
    return rssi, db_to_linear(rssi - ch.noise_floor), d3d


def estimate_distance_from_rssi(rssi, h, table: EtaTable | None, cfg: MeasurementConfig, max_iter: int = 50, tol: float = 0.01):
    """Invert the mean-exponent log-distance model for the 3D distance.

    Fixed-point iteration on ``d = 10 ** (budget / (10 eta(d)))`` with the
    exponent re-read at every iterate. The map's slope in log distance
    approaches -1 for far NLOS-dominated links, so plain iteration crawls;
    Wegstein relaxation from the secant slope of successive iterates (in
    log distance) restores fast convergence. Returns ``(d_est, converged)``.
    """
    rssi = np.atleast_1d(np.asarray(rssi, dtype=float))
    if not np.all(np.isfinite(rssi)):
        raise ValueError("rssi must be finite")
    ch = cfg.channel
    h = np.broadcast_to(np.asarray(h, dtype=float), rssi.shape)
    h_ch = channel_altitude(h)
    budget = ch.tx_power - ch.ref_pathloss_1m - rssi  # = 10 eta log10(d3d)
    lo, hi = np.log(D_EST_MIN), np.log(D_EST_MAX)

    def g(x):
        d = np.exp(x)
        d2d = np.sqrt(np.maximum(d**2 - h**2, 0.0))
        if table is not None:
            eta = np.asarray(table.lookup(d2d, h_ch), dtype=float).reshape(d.shape)
        else:
            eta = np.asarray(channel.mean_path_loss_exponent(d2d, h_ch)).reshape(d.shape)
        return np.clip(budget * np.log(10.0) / (10.0 * eta), lo, hi)

    x = np.clip(budget * np.log(10.0) / (10.0 * channel.los_exponent(h_ch)), lo, hi)
    gx = g(x)
    x_prev = g_prev = None
    converged = np.zeros(x.shape, dtype=bool)
    for _ in range(max_iter):
        q = np.zeros_like(x)
        if x_prev is not None:
            dx = x - x_prev
            ok = np.abs(dx) > 1e-14
            slope = np.where(ok, (gx - g_prev) / np.where(ok, dx, 1.0), 0.0)
            # q = s / (s - 1); bounded to keep the update a damped step
            q = np.clip(slope / (slope - 1.0), -2.0, 0.9)
        new = np.clip(q * x + (1.0 - q) * gx, lo, hi)
        new = np.where(converged, x, new)
        converged |= np.abs(np.exp(new) - np.exp(x)) < tol
        x_prev, g_prev = x, gx
        x = new
        gx = g(x)
        if converged.all():
            break
    if not converged.all():
        log.debug("rssi inversion did not converge for %d links", int((~converged).sum()))
    return np.exp(x), converged


def tdoa_noise_std(snr, cfg: MeasurementConfig):
    """Per-link ranging std in meters."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr <= 0):
        raise ValueError("snr must be positive")
    return cfg.tdoa_noise_scale * cfg.kappa / np.sqrt(cfg._information(snr))


def observe_links(dep: Deployment, cfg: MeasurementConfig, table: EtaTable | None, rng_los, rng_fading, delta_los: float = 0.0, h_assumed=None):
    """LOS draw, RSSI synthesis and RSSI ranging for every node of ``dep``.

    Returns links in ascending node-id order. ``h_assumed`` is the altitude
    the UAV uses when inverting RSSI (defaults to the true height difference).
    """
    order = np.argsort(dep.ids)
    ids = dep.ids[order]
    xyz = dep.xyz[order]
    d2d = np.hypot(*(xyz[:, :2] - dep.uav_xy).T)
    h_link = dep.uav_h - xyz[:, 2]
    los = draw_los_state(d2d, channel_altitude(h_link), delta_los, rng_los)
    rssi, snr, d3d = synthesize_rssi(d2d, h_link, los, cfg, rng_fading)
    h_inv = h_link if h_assumed is None else h_assumed
    d_est, ok = estimate_distance_from_rssi(rssi, h_inv, table, cfg)
    return [
        LinkObservation(int(i), float(r), float(de), bool(l), float(t), float(s), float(dd), bool(c))
        for i, r, de, l, t, s, dd, c in zip(ids, rssi, d_est, los, d3d, snr, d2d, ok)
    ]


def synthesize_tdoa(dep: Deployment, selected_ids, links, cfg: MeasurementConfig, rng: np.random.Generator) -> list[TdoaMeasurement]:
    """Range differences of selected nodes against the first selected node.

    Gaussian draws are made for every node of the deployment in id order and
    then indexed, so a given RNG stream yields the same per-node errors no
    matter which subset is selected.
    """
    selected_ids = [int(i) for i in selected_ids]
    if len(selected_ids) < 3:
        raise ValueError("need at least 3 selected nodes")
    by_id = {l.node_id: l for l in links}
    all_ids = sorted(int(i) for i in dep.ids)
    slot = {i: k for k, i in enumerate(all_ids)}
    n = len(all_ids)
    z_sync = rng.standard_normal(n)
    z_link = rng.standard_normal(n)
    sync_std = cfg.sync_residual_std if cfg.sync_model == "common_cancel" else cfg.sync_common_std

    ref = selected_ids[0]
    ref_link = by_id[ref]
    ref_std = float(tdoa_noise_std(ref_link.snr, cfg))
    out = []
    for nid in selected_ids[1:]:
        link = by_id[nid]
        std = float(np.hypot(float(tdoa_noise_std(link.snr, cfg)), ref_std))
        sync = SPEED_OF_LIGHT * sync_std * (z_sync[slot[nid]] - z_sync[slot[ref]])
        diff = (link.true_d3d - ref_link.true_d3d) + sync + std * z_link[slot[nid]]
        out.append(TdoaMeasurement((ref, nid), float(diff), std))
    return out

