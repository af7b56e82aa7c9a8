"""Fixed-N sweep over every (R, h_u) cell, printed as an RMSE table.

Usage: python3 scripts/run_sweep.py [--trials N] [--workers N] [--out DIR] [--config PATH]
"""

import argparse
import csv
import sys
from pathlib import Path

from hexloc import cli


def print_table(summary: Path) -> None:
    with open(summary, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cells = sorted({(float(r["R"]), float(r["h_u"])) for r in rows})
    labels = list(dict.fromkeys(r["n_or_policy"] for r in rows))
    rmse = {(float(r["R"]), float(r["h_u"]), r["n_or_policy"]): float(r["rmse_m"]) for r in rows}
    print("N".rjust(6) + "".join(f"R={R:g},h={h:g}".rjust(14) for R, h in cells))
    for lab in labels:
        print(lab.rjust(6) + "".join(f"{rmse[(R, h, lab)]:14.3f}" for R, h in cells))


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--config")
    args = ap.parse_args(argv)
    cmd = ["sweep", "--trials", str(args.trials), "--workers", str(args.workers), "--out", args.out]
    if args.config:
        cmd += ["--config", args.config]
    code = cli.main(cmd)
    if code == 0:
        print_table(Path(args.out) / "summary.csv")
    return code


if __name__ == "__main__":
    sys.exit(main())
