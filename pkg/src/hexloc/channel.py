"""Air-to-ground (UMi-AV) statistical channel model.

LOS probability, the LOS/NLOS-averaged path-loss exponent and its
derivatives with respect to horizontal distance, plus a precomputed
bilinear lookup table of the averaged exponent.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

SPEED_OF_LIGHT = 299_792_458.0

H_MIN = 20.0
H_MAX = 120.0

# d1 floor (m) and the altitude at which the floor stops binding
D1_FLOOR = 18.0
H_D1_KNEE = 10 ** ((432.94 + D1_FLOOR) / 294.05)

_VALIDITY_EPS = 1e-9


class ChannelDomainError(ValueError):
    """Input outside the domain where the channel model is defined."""


def free_space_pathloss_1m(carrier_freq: float) -> float:
    """Free-space path loss at 1 m, in dB."""
    return float(20.0 * np.log10(4.0 * np.pi * carrier_freq / SPEED_OF_LIGHT))


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget and fading constants of the simulated radio links."""

    carrier_freq: float = 3.5e9
    tx_power: float = 15.0  # dBm
    noise_floor: float = -91.0  # dBm, total over the bandwidth
    bandwidth: float = 10e6
    k_los: float = 3.0
    k_nlos: float = 0.1
    num_paths: int = 4
    max_delay_spread: float = 2e-7
    ref_pathloss_1m: float | None = None  # dB; None -> free space at carrier_freq

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if not self.k_los >= self.k_nlos >= 0:
            raise ValueError("require k_los >= k_nlos >= 0")
        if self.num_paths < 1:
            raise ValueError("num_paths must be >= 1")
        if self.ref_pathloss_1m is None:
            object.__setattr__(self, "ref_pathloss_1m", free_space_pathloss_1m(self.carrier_freq))


@dataclass(frozen=True)
class Geometry2D:
    d2d: float
    h: float

    def __post_init__(self):
        check_geometry(self.d2d, self.h)


def check_geometry(d2d, h) -> None:
    d2d = np.asarray(d2d, dtype=float)
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(d2d)) or np.any(d2d < 0):
        raise ChannelDomainError("d2d must be finite and >= 0")
    if not np.all(np.isfinite(h)) or np.any(h < H_MIN - _VALIDITY_EPS) or np.any(h > H_MAX + _VALIDITY_EPS):
        raise ChannelDomainError(f"altitude must lie in [{H_MIN}, {H_MAX}] m")


def breakpoint_params(h):
    """Return ``(d1, p1)`` in meters for altitude ``h`` (m)."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 1):
        raise ChannelDomainError("breakpoint parameters need h > 1 m")
    lh = np.log10(h)
    d1 = np.maximum(294.05 * lh - 432.94, D1_FLOOR)
    p1 = 233.98 * lh - 0.95
    if d1.ndim == 0:
        return float(d1), float(p1)
    return d1, p1


def _exponents(h):
    lh = np.log10(h)
    eta_los = 2.225 - 0.05 * lh
    eta_nlos = 4.32 - 0.76 * lh
    return eta_los, eta_nlos


def los_exponent(h):
    return _exponents(np.asarray(h, dtype=float))[0]


def nlos_exponent(h):
    return _exponents(np.asarray(h, dtype=float))[1]


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def los_probability(d2d, h):
    check_geometry(d2d, h)
    d2d = np.asarray(d2d, dtype=float)
    d1, p1 = breakpoint_params(h)
    safe = np.maximum(d2d, 1e-12)
    ratio = d1 / safe
    p = (1.0 - ratio) * np.exp(-safe / p1) + ratio
    return _scalar(np.where(d2d <= d1, 1.0, p))


def mean_path_loss_exponent(d2d, h):
    """LOS-probability weighted path-loss exponent."""
    p = np.asarray(los_probability(d2d, h))
    eta_los, eta_nlos = _exponents(np.asarray(h, dtype=float))
    return _scalar(eta_nlos * (1.0 - p) + eta_los * p)


def eta_derivatives(d2d, h):
    """First and second derivative of the mean exponent w.r.t. ``d2d``.

    Both vanish inside the breakpoint distance. Beyond it the exponent is
    ``eta_nlos + (eta_los - eta_nlos) * P_los`` so the derivatives are the
    LOS-probability derivatives scaled by ``0.71*log10(h) - 2.095 < 0``.
    """
    check_geometry(d2d, h)
    d = np.asarray(d2d, dtype=float)
    if np.any(d == 0):
        raise ChannelDomainError("eta derivatives undefined at d2d = 0")
    h = np.asarray(h, dtype=float)
    d1, p1 = breakpoint_params(h)
    eta_los, eta_nlos = _exponents(h)
    scale = eta_los - eta_nlos
    e = np.exp(-d / p1)
    dp = (d1 / d**2 - (1.0 - d1 / d) / p1) * e - d1 / d**2
    d2p = (-2.0 * d1 / d**3 - 2.0 * d1 / (p1 * d**2) + (d - d1) / (p1**2 * d)) * e + 2.0 * d1 / d**3
    in_a1 = d <= d1
    return _scalar(np.where(in_a1, 0.0, scale * dp)), _scalar(np.where(in_a1, 0.0, scale * d2p))


def mean_path_loss_db(d2d, h, params: ChannelParams, eta=None):
    """Log-distance path loss in dB; ``eta`` defaults to the mean exponent."""
    d2d = np.asarray(d2d, dtype=float)
    h = np.asarray(h, dtype=float)
    d3d = np.sqrt(d2d**2 + h**2)
    if np.any(d3d < 1.0):
        raise ChannelDomainError("3D distance below the 1 m reference")
    if eta is None:
        eta = mean_path_loss_exponent(d2d, h)
    return _scalar(params.ref_pathloss_1m + 10.0 * np.asarray(eta) * np.log10(d3d))


def _equidistribute(x, density, n):
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    return np.interp(np.linspace(0.0, 1.0, n), cdf, x)


def _kink_strength(h):
    # magnitude of the slope jump of eta at d2d = d1(h), in d2d
    d1, p1 = breakpoint_params(h)
    eta_los, eta_nlos = _exponents(h)
    return np.abs((eta_los - eta_nlos) / d1 * (np.exp(-d1 / p1) - 1.0))


def default_h_grid(h_range, n):
    """Altitude grid refined where the breakpoint d1(h) moves fastest."""
    lo, hi = h_range
    if n < 2 or not hi > lo:
        raise ValueError("degenerate altitude range")
    if hi <= H_D1_KNEE or n < 8:
        return np.linspace(lo, hi, n)
    knee = max(lo, H_D1_KNEE)
    n_low = 0 if knee == lo else max(2, round(0.08 * n))
    hh = np.linspace(knee, hi, 4001)
    # the kink position in d2d moves at 294.05/(h ln 10) m per m of altitude
    density = _kink_strength(hh) * 294.05 / (hh * np.log(10)) + 3e-4
    upper = _equidistribute(hh, density, n - n_low)
    if n_low:
        return np.concatenate([np.linspace(lo, knee, n_low + 1)[:-1], upper])
    return upper


def default_d2d_grid(d2d_range, n, h_max=H_MAX):
    """Horizontal grid with 18 m on a node and a dense band over [18, d1(h_max)]."""
    lo, hi = d2d_range
    if n < 2 or not hi > lo:
        raise ValueError("degenerate distance range")
    band_hi = min(hi, breakpoint_params(h_max)[0])
    if not (lo < D1_FLOOR < band_hi) or n < 20:
        return np.linspace(lo, hi, n)
    n_low = 3
    n_band = n - n_low if band_hi == hi else round(0.8 * n)
    below = np.linspace(lo, D1_FLOOR, n_low + 1)[:-1]
    band = D1_FLOOR + (band_hi - D1_FLOOR) * np.linspace(0.0, 1.0, n_band) ** 1.3
    rest = np.linspace(band_hi, hi, n - n_low - n_band + 1)[1:]
    return np.concatenate([below, band, rest])


@dataclass(frozen=True)
class EtaTable:
    """Averaged path-loss exponent on a (d2d, h) grid with bilinear lookup.

    Lookups outside the grid clamp to the nearest edge.
    """

    d2d_grid: np.ndarray
    h_grid: np.ndarray
    values: np.ndarray
    _interp: RegularGridInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = np.asarray(self.d2d_grid, dtype=float)
        h = np.asarray(self.h_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.ndim != 1 or h.ndim != 1 or len(d) < 2 or len(h) < 2:
            raise ValueError("need at least 2 grid points per axis")
        if np.any(np.diff(d) <= 0) or np.any(np.diff(h) <= 0):
            raise ValueError("grids must be strictly ascending")
        if v.shape != (len(d), len(h)):
            raise ValueError(f"values shape {v.shape} != ({len(d)}, {len(h)})")
        for name, arr in (("d2d_grid", d), ("h_grid", h), ("values", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_interp", RegularGridInterpolator((d, h), v, method="linear"))

    def lookup(self, d2d, h):
        d2d, h = np.broadcast_arrays(np.asarray(d2d, dtype=float), np.asarray(h, dtype=float))
        pts = np.stack(
            [
                np.clip(d2d, self.d2d_grid[0], self.d2d_grid[-1]),
                np.clip(h, self.h_grid[0], self.h_grid[-1]),
            ],
            axis=-1,
        )
        return _scalar(self._interp(pts))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d2d\\h"] + [f"{x:.6f}" for x in self.h_grid])
            for d, row in zip(self.d2d_grid, self.values):
                w.writerow([f"{d:.6f}"] + [f"{x:.6f}" for x in row])

    @classmethod
    def from_csv(cls, path) -> "EtaTable":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        h_grid = np.array([float(x) for x in rows[0][1:]])
        d2d_grid = np.array([float(r[0]) for r in rows[1:]])
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(d2d_grid, h_grid, values)


def build_eta_table(d2d_range=(1.0, 1200.0), h_range=(H_MIN, H_MAX), resolution=(200, 100), uniform=False) -> EtaTable:
    """Tabulate the mean exponent.

    ``resolution`` is ``(n_d2d, n_h)``. By default grid points are
    concentrated around the LOS breakpoint, where the exponent has a kink;
    ``uniform=True`` gives evenly spaced axes.
    """
    n_d, n_h = resolution
    if n_d < 2 or n_h < 2:
        raise ValueError("resolution must be >= 2 per axis")
    if not d2d_range[1] > d2d_range[0] or not h_range[1] > h_range[0]:
        raise ValueError("degenerate table range")
    check_geometry(np.asarray(d2d_range), np.asarray(h_range))
    if uniform:
        d_grid = np.linspace(*d2d_range, n_d)
        h_grid = np.linspace(*h_range, n_h)
    else:
        d_grid = default_d2d_grid(d2d_range, n_d, h_max=h_range[1])
        h_grid = default_h_grid(h_range, n_h)
    values = mean_path_loss_exponent(d_grid[:, None], h_grid[None, :])
    return EtaTable(d_grid, h_grid, values)
