"""Seeded Monte Carlo trials.

Every trial draws from its own Philox streams keyed by ``(seed, trial_id,
stage)``, so results do not depend on worker count or scheduling. A trial
scene (deployment, links, GPS prior, altimeter reading and TDoA error
draws) is built once and then evaluated under several selection policies,
which share all random numbers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import channel, topology
from ..measurement import LinkObservation, TdoaMeasurement, observe_links, synthesize_tdoa
from ..selection import N_CAP, N_MIN, averaged_candidates, rssi_optimum_finder, theoretical_n_opt
from ..solver import initialize_from_gps, localize, measure_altitude
from .config import ScenarioConfig

log = logging.getLogger(__name__)

STAGES = ("topology", "los", "fading", "gps", "altimeter", "tdoa")


def trial_streams(seed: int, trial_id: int) -> dict[str, np.random.Generator]:
    return {
        name: np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial_id, k))))
        for k, name in enumerate(STAGES)
    }


@lru_cache(maxsize=16)
def eta_table_for(R: float) -> channel.EtaTable:
    return channel.build_eta_table((1.0, 10.0 * R))


@lru_cache(maxsize=64)
def distance_profile(R: float, layers: int, trials: int, seed: int) -> topology.DistanceProfile:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(2**31 - 1,))))
    return topology.empirical_distance_increments(R, layers, trials, rng)


@lru_cache(maxsize=64)
def empirical_n(R: float, h: float, layers: int, trials: int, seed: int, phi_prime_mode: str = "proxy") -> int:
    """Fixed N from the unperturbed averaged model at (R, h), clamped to [3, 20]."""
    prof = distance_profile(R, layers, trials, seed)
    cands = averaged_candidates(prof, h, eta_table_for(R))
    n = theoretical_n_opt(cands, h, d2d_prime=prof.d_prime, phi_prime_mode=phi_prime_mode)
    return min(N_CAP, max(N_MIN, n))


@dataclass(frozen=True)
class Policy:
    mode: str
    n: int | None = None

    @property
    def label(self) -> str:
        return str(self.n) if self.mode == "fixed_n" else self.mode


@dataclass(frozen=True)
class TrialScene:
    trial_id: int
    deployment: topology.Deployment
    links: tuple[LinkObservation, ...]
    order: tuple[int, ...]  # node ids by ascending RSSI distance
    init_xy: np.ndarray
    h_measured: float
    tdoa_seed: tuple[int, int, int]


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    R: float
    h_u: float
    delta_los: float
    selection_mode: str
    n_or_policy: str
    true_x: float
    true_y: float
    true_h: float
    est_x: float
    est_y: float
    est_z: float
    horizontal_error: float
    error_3d: float
    n_selected: int
    converged: bool
    iterations: int
    residual: float
    rng_stream_id: str

    @property
    def true_xy(self):
        return np.array([self.true_x, self.true_y])

    @property
    def est_xy(self):
        return np.array([self.est_x, self.est_y])


def prepare_trial(cfg: ScenarioConfig, trial_id: int) -> TrialScene:
    s = trial_streams(cfg.seed, trial_id)
    R = cfg.coverage_radius
    dep = topology.generate_hex_grid(R, cfg.layers, s["topology"])
    delta = topology.random_uav_offset(R, s["topology"]) if cfg.uav_offset == "random" else float(cfg.uav_offset)
    dep = topology.place_uav(dep, delta, cfg.uav_altitude, s["topology"])
    h_meas = measure_altitude(cfg.uav_altitude, cfg.solver, s["altimeter"])
    links = observe_links(
        dep,
        cfg.measurement,
        eta_table_for(R),
        s["los"],
        s["fading"],
        delta_los=cfg.delta_los,
        h_assumed=h_meas,
    )
    d_est = np.array([l.d_est for l in links])
    ids = np.array([l.node_id for l in links])
    order = tuple(int(i) for i in ids[np.lexsort((ids, d_est))])
    init_xy = initialize_from_gps(dep.uav_xy, cfg.solver, s["gps"])
    return TrialScene(trial_id, dep, tuple(links), order, init_xy, h_meas, (cfg.seed, trial_id, STAGES.index("tdoa")))


def select(cfg: ScenarioConfig, scene: TrialScene, policy: Policy) -> list[int]:
    if policy.mode == "fixed_n":
        n = policy.n
    elif policy.mode == "empirical":
        n = empirical_n(cfg.coverage_radius, cfg.uav_altitude, cfg.layers, cfg.profile_trials, cfg.seed, cfg.t2_phi_prime)
    elif policy.mode == "alg1":
        by_id = {l.node_id: l for l in scene.links}
        d_est = [by_id[i].d_est for i in scene.order]
        h = float(np.clip(scene.h_measured, channel.H_MIN, channel.H_MAX))
        res = rssi_optimum_finder(
            d_est,
            h,
            eta_table_for(cfg.coverage_radius),
            n_max=min(cfg.n_max, len(d_est)),
            node_ids=list(scene.order),
            phi_prime_mode=cfg.t2_phi_prime,
        )
        return list(res.selected_ids)
    else:
        raise ValueError(f"unknown selection mode {policy.mode!r}")
    return list(scene.order[:n])


def scene_tdoa(cfg: ScenarioConfig, scene: TrialScene, selected: list[int]) -> list[TdoaMeasurement]:
    seed, trial_id, stage = scene.tdoa_seed
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial_id, stage))))
    return synthesize_tdoa(scene.deployment, selected, scene.links, cfg.measurement, rng)


def evaluate(cfg: ScenarioConfig, scene: TrialScene, policy: Policy) -> TrialRecord:
    dep = scene.deployment
    selected = select(cfg, scene, policy)
    meas = scene_tdoa(cfg, scene, selected)
    positions = {int(i): p for i, p in zip(dep.ids, dep.xyz)}
    try:
        est = localize(meas, positions, scene.init_xy, scene.h_measured, cfg.solver)
        est_xy, est_z, ok, iters, resid = est.xy, est.z, est.converged, est.iterations, est.residual
    except (ValueError, FloatingPointError) as exc:
        log.warning("trial %d (%s) failed: %s", scene.trial_id, policy.label, exc)
        est_xy, est_z, ok, iters, resid = scene.init_xy, scene.h_measured, False, 0, float("nan")
    err = float(np.hypot(*(est_xy - dep.uav_xy)))
    err3 = float(np.sqrt(err**2 + (est_z - dep.uav_h) ** 2))
    return TrialRecord(
        trial_id=scene.trial_id,
        R=cfg.coverage_radius,
        h_u=cfg.uav_altitude,
        delta_los=cfg.delta_los,
        selection_mode=policy.mode,
        n_or_policy=policy.label,
        true_x=float(dep.uav_xy[0]),
        true_y=float(dep.uav_xy[1]),
        true_h=float(dep.uav_h),
        est_x=float(est_xy[0]),
        est_y=float(est_xy[1]),
        est_z=float(est_z),
        horizontal_error=err,
        error_3d=err3,
        n_selected=len(selected),
        converged=bool(ok),
        iterations=int(iters),
        residual=float(resid),
        rng_stream_id=f"{cfg.seed}:{scene.trial_id}",
    )


def run_trial(cfg: ScenarioConfig, trial_index: int, policy: Policy | None = None) -> TrialRecord:
    if policy is None:
        policy = Policy(cfg.selection_mode, cfg.n_fixed if cfg.selection_mode == "fixed_n" else None)
    return evaluate(cfg, prepare_trial(cfg, trial_index), policy)


def _run_chunk(args):
    cfg, trial_ids, policies = args
    out = []
    for t in trial_ids:
        scene = prepare_trial(cfg, t)
        out.extend(evaluate(cfg, scene, p) for p in policies)
    return out


def run_trials(cfg: ScenarioConfig, policies, workers: int = 1, trial_ids=None) -> list[TrialRecord]:
    """All policies on all trials, sorted by (policy order, trial_id)."""
    policies = list(policies)
    trial_ids = list(range(cfg.trials)) if trial_ids is None else list(trial_ids)
    if workers <= 1:
        records = _run_chunk((cfg, trial_ids, policies))
    else:
        chunks = [trial_ids[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [r for part in pool.map(_run_chunk, [(cfg, c, policies) for c in chunks]) for r in part]
    rank = {p.label: k for k, p in enumerate(policies)}
    records.sort(key=lambda r: (rank[r.n_or_policy], r.trial_id))
    return records


def sweep_policies(cfg: ScenarioConfig) -> list[Policy]:
    return [Policy("fixed_n", n) for n in cfg.n_fixed_sweep] + [Policy("alg1")]


def sweep_cells(cfg: ScenarioConfig):
    for R in cfg.sweep_radii:
        for h in cfg.sweep_altitudes:
            yield cfg.with_updates(coverage_radius=float(R), uav_altitude=float(h))


def los_cells(cfg: ScenarioConfig):
    for d in cfg.los_grid:
        yield cfg.with_updates(delta_los=float(d))
