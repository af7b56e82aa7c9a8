"""Reference-count selection.

The localization variance of N nearest references is proportional to
``F(N) = Phi(N)**2 / N**3`` where ``Phi`` is the running sum of the link
costs ``phi_n = d3d_n ** (eta_n / 2)``.  ``F'(N) = T1(N) * T2(N)`` with
``T1 > 0``, so the optimum sits where the sequence ``T2`` turns
non-negative.  :func:`rssi_optimum_finder` estimates that crossing from
RSSI distances alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import channel
from .channel import EtaTable
from .topology import DistanceProfile, layer_of_rank

N_MIN = 3
N_CAP = 20

PHI_PRIME_MODES = ("proxy", "zero")


@dataclass(frozen=True)
class CandidateLink:
    node_id: int
    d_est: float
    d2d_est: float
    eta_bar: float
    phi: float


@dataclass(frozen=True)
class SelectionResult:
    candidates: tuple[CandidateLink, ...]
    t2_sequence: np.ndarray
    t2_compensated: np.ndarray
    n_opt_raw: int
    n_opt_compensated: int
    n_opt: int
    selected_ids: tuple[int, ...]


def phi(d2d, h, eta):
    """Link cost ``(d2d**2 + h**2) ** (eta / 4)``."""
    d2d = np.asarray(d2d, dtype=float)
    return (d2d**2 + np.asarray(h, dtype=float) ** 2) ** (np.asarray(eta, dtype=float) / 4.0)


def _phis(candidates) -> np.ndarray:
    return np.array([c.phi for c in candidates], dtype=float)


def capital_phi(candidates: Sequence[CandidateLink], N: int) -> float:
    if not 1 <= N <= len(candidates):
        raise ValueError(f"N={N} outside [1, {len(candidates)}]")
    return float(_phis(candidates[:N]).sum())


def objective_f(candidates: Sequence[CandidateLink], N: int) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    return capital_phi(candidates, N) ** 2 / N**3


def objective_sequence(candidates: Sequence[CandidateLink]) -> np.ndarray:
    """``F(N)`` for every ``N = 1..len(candidates)``."""
    p = _phis(candidates)
    n = np.arange(1, len(p) + 1)
    return np.cumsum(p) ** 2 / n**3


def brute_force_n_opt(candidates: Sequence[CandidateLink]) -> int:
    return int(np.argmin(objective_sequence(candidates))) + 1


def _log_term(d2d, h):
    return np.log(np.asarray(d2d, dtype=float) ** 2 + np.asarray(h, dtype=float) ** 2)


def _check_positive(d2d):
    if np.any(np.asarray(d2d) <= 0):
        raise channel.ChannelDomainError("phi derivatives need d2d > 0")


def phi_d2d_derivative(d2d, h, eta=None):
    """d phi / d d2d, with eta and its slope taken from the channel model."""
    _check_positive(d2d)
    d2d = np.asarray(d2d, dtype=float)
    if eta is None:
        eta = channel.mean_path_loss_exponent(d2d, h)
    eta_p, _ = channel.eta_derivatives(d2d, h)
    s = d2d**2 + np.asarray(h, dtype=float) ** 2
    return phi(d2d, h, eta) * (0.25 * np.asarray(eta_p) * np.log(s) + d2d * np.asarray(eta) / (2.0 * s))


def phi_prime_analytic(d2d, h, d2d_prime, eta=None):
    """Chain-rule derivative of phi along the node rank."""
    return phi_d2d_derivative(d2d, h, eta) * np.asarray(d2d_prime, dtype=float)


def phi_double_prime_analytic(d2d, h, d2d_prime, eta=None, d2d_double_prime=0.0):
    """Second derivative of phi along the node rank.

    The ``phi_d * d''`` summand is kept but ``d2d_double_prime`` defaults
    to zero, since the sorted-distance curvature is negligible inside a ring.
    """
    _check_positive(d2d)
    d = np.asarray(d2d, dtype=float)
    h = np.asarray(h, dtype=float)
    if eta is None:
        eta = channel.mean_path_loss_exponent(d, h)
    eta = np.asarray(eta, dtype=float)
    eta_p, eta_pp = channel.eta_derivatives(d, h)
    s = d**2 + h**2
    L = np.log(s)
    g1 = 0.25 * eta_p * L + d * eta / (2.0 * s)
    g2 = 0.25 * eta_pp * L + eta_p * d / s + eta * (h**2 - d**2) / (2.0 * s**2)
    p = phi(d, h, eta)
    return p * (g1**2 + g2) * np.asarray(d2d_prime) ** 2 + p * g1 * np.asarray(d2d_double_prime)


def rank_increment_proxy(n_candidates: int, nearest_offset: float) -> np.ndarray:
    """d'(N) surrogate: the offset itself for N = 1, offset / (3k) in layer k."""
    n = np.arange(1, n_candidates + 1)
    k = np.maximum(layer_of_rank(n), 1)
    out = nearest_offset / (3.0 * k)
    out[0] = nearest_offset
    return out


def t2_sequence(candidates: Sequence[CandidateLink], h: float, d2d_prime=None, phi_prime_mode: str = "proxy") -> np.ndarray:
    """``T2(N) = phi(N) - 3 Phi(N) / (2N) + phi'(N) / 2`` for N = 1..len.

    ``d2d_prime`` supplies per-rank distance increments; if omitted the
    layer proxy built from the nearest candidate's horizontal distance is
    used. ``phi_prime_mode="zero"`` drops the phi' term.
    """
    if phi_prime_mode not in PHI_PRIME_MODES:
        raise ValueError(f"phi_prime_mode must be one of {PHI_PRIME_MODES}")
    p = _phis(candidates)
    n = np.arange(1, len(p) + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        t2 = p - 1.5 * np.cumsum(p) / n
        if phi_prime_mode == "proxy":
            d2d = np.array([c.d2d_est for c in candidates])
            eta = np.array([c.eta_bar for c in candidates])
            if d2d_prime is None:
                d2d_prime = rank_increment_proxy(len(p), d2d[0])
            hh = np.clip(h, channel.H_MIN, channel.H_MAX)
            t2 = t2 + 0.5 * phi_prime_analytic(d2d, hh, np.asarray(d2d_prime)[: len(p)], eta)
    return t2


def t2(candidates: Sequence[CandidateLink], N: int, h: float, d2d_prime=None, phi_prime_mode: str = "proxy") -> float:
    if not 1 <= N <= len(candidates):
        raise ValueError(f"N={N} outside [1, {len(candidates)}]")
    return float(t2_sequence(candidates, h, d2d_prime, phi_prime_mode)[N - 1])


def theoretical_n_opt(candidates: Sequence[CandidateLink], h: float, d2d_prime=None, phi_prime_mode: str = "proxy") -> int:
    """First N with ``T2(N) >= 0``; ``len(candidates)`` if there is none."""
    if len(candidates) == 0:
        raise ValueError("no candidates")
    seq = t2_sequence(candidates, h, d2d_prime, phi_prime_mode)
    hits = np.flatnonzero(seq >= 0)
    return int(hits[0]) + 1 if hits.size else len(candidates)


def make_candidates(d_est, h: float, table: EtaTable | None = None, node_ids=None) -> list[CandidateLink]:
    """Sort RSSI distances and derive horizontal distance, eta and phi.

    Estimates shorter than the altitude are geometrically impossible; their
    horizontal distance is clamped to 1 m instead of dropping the node.
    """
    d_est = np.asarray(d_est, dtype=float)
    if not np.all(np.isfinite(d_est)):
        raise ValueError("distance estimates must be finite")
    if node_ids is None:
        node_ids = np.arange(len(d_est))
    node_ids = np.asarray(node_ids)
    order = np.lexsort((node_ids, d_est))
    d_est, node_ids = d_est[order], node_ids[order]
    with np.errstate(over="ignore"):
        d2d = np.sqrt(np.maximum(d_est**2 - h**2, 0.0))
    d2d = np.maximum(d2d, 1.0)
    hh = np.clip(h, channel.H_MIN, channel.H_MAX)
    if table is not None:
        eta = np.asarray(table.lookup(d2d, hh), dtype=float).reshape(d2d.shape)
    else:
        eta = np.asarray(channel.mean_path_loss_exponent(d2d, hh), dtype=float).reshape(d2d.shape)
    with np.errstate(over="ignore"):
        p = phi(d2d, h, eta)
    return [
        CandidateLink(int(i), float(de), float(dh), float(e), float(pp))
        for i, de, dh, e, pp in zip(node_ids, d_est, d2d, eta, p)
    ]


def averaged_candidates(profile: DistanceProfile, h: float, table: EtaTable | None = None) -> list[CandidateLink]:
    """Candidates along the Monte Carlo mean distance profile."""
    d2d = np.maximum(profile.d2d, 1.0)
    return make_candidates(np.sqrt(d2d**2 + h**2), h, table)


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def count_with_compensation(t2_values) -> tuple[int, int, int, np.ndarray]:
    """Negative-count rule with mean-shift compensation and [3, 20] clamp.

    Returns ``(raw, compensated, final, shifted_t2)``.
    """
    t2_values = np.asarray(t2_values, dtype=float)
    raw = int(np.count_nonzero(t2_values < 0))
    with np.errstate(invalid="ignore"):
        mean = float(np.mean(t2_values))
        shifted = t2_values - mean if mean > 0 else t2_values + abs(mean)
    comp = int(np.count_nonzero(shifted < 0))
    n = round_half_away(raw / 2 + comp / 2)
    return raw, comp, min(N_CAP, max(n, N_MIN)), shifted


def rssi_optimum_finder(
    d_est,
    h: float,
    table: EtaTable | None,
    n_max: int = N_CAP,
    node_ids=None,
    phi_prime_mode: str = "proxy",
) -> SelectionResult:
    if len(d_est) < N_MIN or n_max < N_MIN:
        raise ValueError("need at least 3 candidates")
    if n_max > len(d_est):
        raise ValueError(f"n_max={n_max} exceeds the {len(d_est)} available estimates")
    cands = make_candidates(d_est, h, table, node_ids)[:n_max]
    seq = t2_sequence(cands, h, phi_prime_mode=phi_prime_mode)
    raw, comp, n_opt, shifted = count_with_compensation(seq)
    return SelectionResult(
        candidates=tuple(cands),
        t2_sequence=seq,
        t2_compensated=shifted,
        n_opt_raw=raw,
        n_opt_compensated=comp,
        n_opt=n_opt,
        selected_ids=tuple(c.node_id for c in cands[:n_opt]),
    )
