"""CSV emission for summaries, trial records and observation dumps."""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

from .experiments import SummaryStats
from .runner import TrialRecord

SUMMARY_COLUMNS = [
    "mode", "n_or_policy", "R", "h_u", "delta_los", "trials", "rmse_m", "mean_err_m",
    "p90_err_m", "mean_n_selected", "seed", "kappa",
]


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summary(stats: list[SummaryStats], path, seed: int, kappa: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS + ["n_failed"])
        for s in stats:
            w.writerow([_fmt(x) for x in (
                s.mode, s.n_or_policy, s.R, s.h_u, s.delta_los, s.trials, s.rmse, s.mean_error,
                s.p90_error, s.mean_n_selected, seed, kappa, s.n_failed,
            )])


TRIAL_COLUMNS = [f.name for f in dataclasses.fields(TrialRecord)]


def write_trials(records: list[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in TRIAL_COLUMNS])


def read_trials(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_results(stats, records, out_dir, seed: int, kappa: float) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary, trials = out / "summary.csv", out / "trials.csv"
    write_summary(stats, summary, seed, kappa)
    write_trials(records, trials)
    return summary, trials


def write_observations(path, links, measurements) -> None:
    diffs = {m.node_pair[1]: m.range_diff for m in measurements}
    ref = measurements[0].node_pair[0] if measurements else None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "rssi", "d_est", "los", "true_d3d", "range_diff"])
        for l in links:
            rd = 0.0 if l.node_id == ref else diffs.get(l.node_id, "")
            w.writerow([l.node_id, _fmt(l.rssi), _fmt(l.d_est), int(l.los_state), _fmt(l.true_d3d), _fmt(rd) if rd != "" else ""])
