"""Fixed-N sweep and LOS-perturbation study built on the trial runner."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .runner import Policy, TrialRecord, empirical_n, los_cells, run_trials, sweep_cells, sweep_policies


@dataclass(frozen=True)
class SummaryStats:
    mode: str
    n_or_policy: str
    R: float
    h_u: float
    delta_los: float
    trials: int
    rmse: float
    mean_error: float
    p90_error: float
    mean_n_selected: float
    n_failed: int


def error_of(r: TrialRecord, include_z: bool = False) -> float:
    return r.error_3d if include_z else r.horizontal_error


def summarize(records: list[TrialRecord], include_z: bool = False) -> list[SummaryStats]:
    """One row per (R, h_u, delta_los, policy), in first-seen order."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.R, r.h_u, r.delta_los, r.selection_mode, r.n_or_policy), []).append(r)
    out = []
    for (R, h, d, mode, label), rs in groups.items():
        err = np.array([error_of(r, include_z) for r in rs])
        out.append(
            SummaryStats(
                mode=mode,
                n_or_policy=label,
                R=R,
                h_u=h,
                delta_los=d,
                trials=len(rs),
                rmse=float(np.sqrt(np.mean(err**2))),
                mean_error=float(np.mean(err)),
                p90_error=float(np.percentile(err, 90)),
                mean_n_selected=float(np.mean([r.n_selected for r in rs])),
                n_failed=sum(not r.converged for r in rs),
            )
        )
    return out


def run_sweep(cfg: ScenarioConfig, workers: int = 1):
    """Fixed-N curve plus Alg.-1 selection for every (R, h_u) cell."""
    records = []
    for cell in sweep_cells(cfg):
        records.extend(run_trials(cell, sweep_policies(cell), workers))
    return summarize(records, cfg.include_z), records


def run_los_study(cfg: ScenarioConfig, workers: int = 1):
    """Alg.-1 vs the empirical fixed N across LOS-probability offsets.

    Runs at the configured (coverage_radius, uav_altitude).
    """
    records = []
    policies = [Policy("alg1"), Policy("empirical")]
    for cell in los_cells(cfg):
        records.extend(run_trials(cell, policies, workers))
    return summarize(records, cfg.include_z), records


def empirical_n_for(cfg: ScenarioConfig) -> int:
    return empirical_n(cfg.coverage_radius, cfg.uav_altitude, cfg.layers, cfg.profile_trials, cfg.seed, cfg.t2_phi_prime)
