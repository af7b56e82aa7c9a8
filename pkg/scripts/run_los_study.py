"""Adaptive vs empirical N under LOS-probability offsets, for both altitudes.

Usage: python3 scripts/run_los_study.py [--radius R] [--trials N] [--workers N] [--out DIR]
"""

import argparse
import sys
import tempfile
from pathlib import Path

from hexloc import cli
from hexloc.harness.config import ScenarioConfig, format_config


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--radius", type=float, default=90.0)
    ap.add_argument("--altitudes", type=float, nargs="+", default=[20.0, 30.0])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/los_study")
    args = ap.parse_args(argv)
    for h in args.altitudes:
        cfg = ScenarioConfig().with_updates(coverage_radius=args.radius, uav_altitude=h)
        with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
            fh.write(format_config(cfg))
        out = Path(args.out) / f"R{args.radius:g}_h{h:g}"
        code = cli.main(["los-study", "--config", fh.name, "--trials", str(args.trials), "--workers", str(args.workers), "--out", str(out)])
        Path(fh.name).unlink()
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
