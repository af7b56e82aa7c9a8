import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexloc import cli
from hexloc.harness import config as hconfig
from hexloc.harness import experiments, io, runner
from hexloc.harness.config import ConfigError, ScenarioConfig

SMALL = dict(sweep_radii=[90.0], sweep_altitudes=[20.0], n_fixed_sweep=[3, 8, 14], trials=6, profile_trials=200)


def small(**kw):
    return ScenarioConfig().with_updates(**{**SMALL, **kw})


def test_defaults_cover_scenario_table():
    cfg = ScenarioConfig()
    assert cfg.seed == 2025 and cfg.trials == 1000
    assert cfg.sweep_radii == [60.0, 90.0, 120.0] and cfg.sweep_altitudes == [20.0, 30.0]
    assert cfg.n_fixed_sweep == list(range(3, 21))
    assert min(cfg.los_grid) == -0.4 and max(cfg.los_grid) == 0.1
    assert cfg.measurement.channel.carrier_freq == 3.5e9
    assert cfg.measurement.sync_common_std == 1e-6
    assert cfg.solver.gps_prior_std == 5.0 and cfg.solver.altitude_noise_std == 1.0


def test_config_round_trip():
    cfg = small(seed=77, weighted=True, delta_los=-0.2, uav_offset=12.5, bandwidth=20e6)
    assert hconfig.parse_config(hconfig.format_config(cfg)) == cfg
    assert hconfig.parse_config(hconfig.format_config()) == ScenarioConfig()


def test_every_leaf_printed():
    text = hconfig.format_config()
    keys = {l.split("=")[0].strip() for l in text.splitlines() if l and not l.startswith("#")}
    assert keys == set(hconfig.LEAVES)


def test_parse_comments_and_errors(tmp_path):
    cfg = hconfig.parse_config("# comment\ntrials = 5  # inline\n\nsolve_3d = yes\n")
    assert cfg.trials == 5 and cfg.solver.solve_3d
    with pytest.raises(ConfigError, match="valid keys"):
        hconfig.parse_config("bogus = 1\n")
    with pytest.raises(ConfigError):
        hconfig.parse_config("trials five\n")
    with pytest.raises(ConfigError):
        hconfig.parse_config("trials = five\n")
    with pytest.raises(ConfigError):
        hconfig.parse_config("n_fixed_sweep = 2, 3\n")
    with pytest.raises(ConfigError):
        hconfig.load_config(tmp_path / "missing.cfg")


def test_carrier_change_rederives_reference_loss():
    cfg = ScenarioConfig().with_updates(carrier_freq=7e9)
    assert cfg.measurement.channel.ref_pathloss_1m == pytest.approx(43.32914410888889 + 20 * np.log10(2))


def test_trial_determinism():
    cfg = small()
    a = runner.run_trial(cfg, 3)
    b = runner.run_trial(cfg, 3)
    assert a == b
    assert a.rng_stream_id == "2025:3"


def test_trial_streams_independent():
    s = runner.trial_streams(1, 0)
    assert len(s) == len(runner.STAGES)
    draws = {k: g.random() for k, g in s.items()}
    assert len(set(draws.values())) == len(draws)
    assert runner.trial_streams(1, 1)["los"].random() != runner.trial_streams(1, 0)["los"].random()


def test_workers_do_not_change_records():
    cfg = small(trials=4)
    pols = runner.sweep_policies(cfg)
    assert runner.run_trials(cfg, pols, workers=1) == runner.run_trials(cfg, pols, workers=2)


@settings(max_examples=15, deadline=None)
@given(trial=st.integers(0, 10_000), R=st.sampled_from([60.0, 90.0, 120.0]), h=st.sampled_from([20.0, 30.0]))
def test_alg1_selection_within_bounds(trial, R, h):
    rec = runner.run_trial(small(coverage_radius=R, uav_altitude=h), trial)
    assert 3 <= rec.n_selected <= 20


def test_horizontal_error_consistent():
    rec = runner.run_trial(small(selection_mode="fixed_n", n_fixed=6), 1)
    assert rec.horizontal_error == pytest.approx(np.hypot(rec.est_x - rec.true_x, rec.est_y - rec.true_y), abs=1e-12)


@pytest.mark.parametrize("mode", ["fixed_n", "alg1", "empirical"])
def test_noiseless_config_recovers(mode):
    cfg = small(selection_mode=mode, tdoa_noise_scale=0.0, sync_residual_std=0.0, altitude_noise_std=0.0)
    for t in range(5):
        rec = runner.run_trial(cfg, t)
        assert rec.horizontal_error < 0.01


def test_summary_rows_and_recomputation(tmp_path):
    cfg = small()
    stats, records = experiments.run_sweep(cfg)
    assert len(stats) == len(cfg.n_fixed_sweep) + 1
    for s in stats:
        assert s.rmse >= s.mean_error - 1e-12
    summary, trials = io.emit_results(stats, records, tmp_path, cfg.seed, cfg.measurement.kappa)
    rows = io.read_trials(trials)
    assert len(rows) == len(records)
    with open(summary) as fh:
        srows = list(csv.DictReader(fh))
    assert list(srows[0])[: len(io.SUMMARY_COLUMNS)] == io.SUMMARY_COLUMNS
    for s in srows:
        err = np.array([float(r["horizontal_error"]) for r in rows if r["n_or_policy"] == s["n_or_policy"]])
        assert abs(np.sqrt(np.mean(err**2)) - float(s["rmse_m"])) < 1e-9
        assert int(s["trials"]) == err.size
        assert int(s["n_failed"]) == sum(r["converged"] == "0" for r in rows if r["n_or_policy"] == s["n_or_policy"])


def test_failed_trials_are_kept():
    cfg = small(max_iterations=1)
    stats, records = experiments.run_sweep(cfg)
    assert len(records) == cfg.trials * (len(cfg.n_fixed_sweep) + 1)
    assert sum(s.n_failed for s in stats) > 0


def test_los_study_pairs():
    cfg = small(los_grid=[-0.4, 0.0], coverage_radius=90.0)
    stats, _ = experiments.run_los_study(cfg)
    assert [(s.mode, s.delta_los) for s in stats] == [("alg1", -0.4), ("empirical", -0.4), ("alg1", 0.0), ("empirical", 0.0)]
    emp = experiments.empirical_n_for(cfg)
    assert all(s.mean_n_selected == emp for s in stats if s.mode == "empirical")


class TestCli:
    def test_print_config(self, capsys):
        assert cli.main(["print-config", "--seed", "9"]) == 0
        assert hconfig.parse_config(capsys.readouterr().out).seed == 9

    def test_config_errors(self, tmp_path, capsys):
        assert cli.main(["print-config", "--config", str(tmp_path / "nope")]) == 1
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense_key = 4\n")
        assert cli.main(["sweep", "--config", str(bad)]) == 1
        assert cli.main(["print-config", "--seed", "-1"]) == 1
        assert cli.main(["print-config", "--workers", "0"]) == 1
        with pytest.raises(SystemExit) as exc:
            cli.main(["sweep", "--no-such-flag"])
        assert exc.value.code == 1

    def test_runtime_error(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("d_est\n10\n20\n")
        assert cli.main(["nopt", str(f), "--altitude", "30"]) == 2

    def test_sweep_writes_outputs(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(hconfig.format_config(small(trials=2, n_fixed_sweep=[5])))
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--dump-observations"]) == 0
        assert (tmp_path / "o" / "summary.csv").is_file()
        assert len(list((tmp_path / "o" / "observations").glob("*.csv"))) == 2

    def test_nopt_and_channel_table(self, tmp_path, capsys):
        f = tmp_path / "d.csv"
        f.write_text("node_id,d_est\n" + "\n".join(f"{i},{30 + 15 * i}" for i in range(25)) + "\n")
        assert cli.main(["nopt", str(f), "--altitude", "25"]) == 0
        out = capsys.readouterr().out
        assert "n_opt=" in out
        assert cli.main(["channel-table", "--out", str(tmp_path), "--resolution", "20", "10"]) == 0
        assert (tmp_path / "eta_table.csv").is_file()
