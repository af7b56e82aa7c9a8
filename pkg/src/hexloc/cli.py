"""Command-line entry point.

Exit status is 0 on success, 1 for configuration errors and 2 for
runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import channel
from .harness import config as hconfig
from .harness.config import ConfigError, ScenarioConfig
from .harness.experiments import empirical_n_for, run_los_study, run_sweep
from .harness.io import emit_results, write_observations
from .harness.runner import Policy, eta_table_for, los_cells, prepare_trial, scene_tdoa, select, sweep_cells
from .selection import N_CAP, rssi_optimum_finder

log = logging.getLogger("hexloc")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # bad flags are configuration errors, not runtime ones
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--dump-observations", action="store_true", help="write per-trial observation CSVs")
    p.add_argument("--weighted", action="store_true", help="inverse-variance weighted solver loss")
    p.add_argument("--solve-3d", action="store_true", help="estimate altitude as well")
    p.add_argument("--include-z", action="store_true", help="report 3D instead of horizontal error")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hexloc", description="Hex-grid TDoA localization with RSSI node selection")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="fixed-N RMSE curves plus adaptive selection per (R, h_u) cell")
    _common(p)
    p = sub.add_parser("los-study", help="adaptive vs empirical N across LOS-probability offsets")
    _common(p)

    p = sub.add_parser("nopt", help="run the node-count selection on a CSV of RSSI distances")
    _common(p)
    p.add_argument("csv", help="CSV with a d_est column and optional node_id column")
    p.add_argument("--altitude", type=float, required=True, help="UAV altitude in meters")
    p.add_argument("--nmax", type=int, default=N_CAP)
    p.add_argument("--radius", type=float, help="coverage radius used to size the exponent table")

    p = sub.add_parser("channel-table", help="export the tabulated mean path-loss exponent")
    _common(p)
    p.add_argument("--d2d-max", type=float, default=1200.0)
    p.add_argument("--resolution", type=int, nargs=2, default=(200, 100), metavar=("ND2D", "NH"))
    p.add_argument("--uniform", action="store_true", help="uniform instead of kink-adapted grid")

    p = sub.add_parser("print-config", help="print the effective configuration")
    _common(p)
    return ap


def resolve_config(args) -> ScenarioConfig:
    cfg = hconfig.load_config(args.config) if args.config else ScenarioConfig()
    updates = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.weighted:
        updates["weighted"] = True
    if args.solve_3d:
        updates["solve_3d"] = True
    if args.include_z:
        updates["include_z"] = True
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg = cfg.with_updates(**updates) if updates else cfg
    if cfg.include_z and not cfg.solver.solve_3d:
        log.warning("include_z without solve_3d reports the altimeter error in z")
    return cfg


def dump_observations(cells, out_dir: Path) -> int:
    """One CSV per (cell, trial) for the configured selection mode."""
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for cfg in cells:
        policy = Policy(cfg.selection_mode, cfg.n_fixed if cfg.selection_mode == "fixed_n" else None)
        for t in range(cfg.trials):
            scene = prepare_trial(cfg, t)
            meas = scene_tdoa(cfg, scene, select(cfg, scene, policy))
            name = f"obs_R{cfg.coverage_radius:g}_h{cfg.uav_altitude:g}_d{cfg.delta_los:g}_t{t}.csv"
            write_observations(out_dir / name, scene.links, meas)
            count += 1
    return count


def _experiment(args, cfg, runner, cells, default_out):
    out = Path(args.out or default_out)
    stats, records = runner(cfg, workers=args.workers)
    summary, trials = emit_results(stats, records, out, cfg.seed, cfg.measurement.kappa)
    for s in stats:
        print(f"{s.mode:>9} {s.n_or_policy:>9} R={s.R:g} h={s.h_u:g} dlos={s.delta_los:+.2f} "
              f"rmse={s.rmse:.4f} mean_n={s.mean_n_selected:.2f} failed={s.n_failed}")
    print(f"wrote {summary} and {trials}")
    if args.dump_observations:
        n = dump_observations(cells, out / "observations")
        print(f"wrote {n} observation files to {out / 'observations'}")


def _read_distances(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "d_est" not in rows[0]:
        raise ConfigError(f"{path}: expected a header with a d_est column")
    d = [float(r["d_est"]) for r in rows]
    ids = [int(r["node_id"]) for r in rows] if "node_id" in rows[0] else None
    return d, ids


def cmd_nopt(args, cfg):
    if not Path(args.csv).is_file():
        raise ConfigError(f"distance file not found: {args.csv}")
    d, ids = _read_distances(args.csv)
    R = args.radius if args.radius is not None else cfg.coverage_radius
    nmax = min(args.nmax, len(d))
    res = rssi_optimum_finder(d, args.altitude, eta_table_for(float(R)), n_max=nmax, node_ids=ids, phi_prime_mode=cfg.t2_phi_prime)
    print("N,node_id,d_est,eta,phi,t2,t2_compensated")
    for n, (c, t, tc) in enumerate(zip(res.candidates, res.t2_sequence, res.t2_compensated), 1):
        print(f"{n},{c.node_id},{c.d_est:.4f},{c.eta_bar:.6f},{c.phi:.6g},{t:.6g},{tc:.6g}")
    print(f"raw={res.n_opt_raw} compensated={res.n_opt_compensated} n_opt={res.n_opt}")
    print("selected=" + " ".join(str(i) for i in res.selected_ids))


def cmd_channel_table(args, cfg):
    nd, nh = args.resolution
    table = channel.build_eta_table((1.0, args.d2d_max), resolution=(nd, nh), uniform=args.uniform)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "eta_table.csv"
    table.to_csv(path)
    print(f"wrote {path} ({len(table.d2d_grid)} x {len(table.h_grid)})")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "print-config":
            sys.stdout.write(hconfig.format_config(cfg))
        elif args.command == "sweep":
            _experiment(args, cfg, run_sweep, list(sweep_cells(cfg)), "results/sweep")
        elif args.command == "los-study":
            print(f"empirical N at R={cfg.coverage_radius:g}, h={cfg.uav_altitude:g}: {empirical_n_for(cfg)}")
            _experiment(args, cfg, run_los_study, list(los_cells(cfg)), "results/los_study")
        elif args.command == "nopt":
            cmd_nopt(args, cfg)
        elif args.command == "channel-table":
            cmd_channel_table(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
