import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexloc import channel, measurement, topology
from hexloc.channel import SPEED_OF_LIGHT, ChannelParams
from hexloc.measurement import MeasurementConfig


@pytest.fixture(scope="module")
def table():
    return channel.build_eta_table((1.0, 1200.0))


def rng(seed=0):
    return np.random.default_rng(seed)


def test_los_state_limits():
    assert measurement.draw_los_state(np.full(100, 10.0), 20.0, 0.0, rng()).all()
    assert not measurement.draw_los_state(np.full(100, 10.0), 20.0, -1.0, rng()).any()


def test_los_frequency():
    hits = measurement.draw_los_state(np.full(100_000, 200.0), 100.0, 0.0, rng(1))
    assert hits.mean() == pytest.approx(0.9219, abs=0.01)


@pytest.mark.parametrize("k", [0.0, 0.1, 3.0])
def test_rician_unit_power(k):
    g = measurement.rician_power(np.full(1_000_000, k), rng(2))
    assert g.mean() == pytest.approx(1.0, abs=0.01)


def test_rician_infinite_k_is_deterministic():
    np.testing.assert_allclose(measurement.rician_power(np.full(5, np.inf), rng()), 1.0)


def test_rssi_without_fading():
    cfg = MeasurementConfig(fading=False)
    d2d = np.array([50.0, 300.0])
    rssi, snr, d3d = measurement.synthesize_rssi(d2d, np.array([30.0, 30.0]), np.array([True, False]), cfg, rng())
    ch = cfg.channel
    eta = np.array([channel.los_exponent(30.0), channel.nlos_exponent(30.0)])
    np.testing.assert_allclose(rssi, ch.tx_power - ch.ref_pathloss_1m - 10 * eta * np.log10(d3d))
    np.testing.assert_allclose(snr, 10 ** ((rssi - ch.noise_floor) / 10))


def test_rssi_decreases_in_expectation():
    cfg = MeasurementConfig()
    d2d = np.repeat([20.0, 100.0, 400.0], 20000)
    rssi, _, _ = measurement.synthesize_rssi(d2d, np.full(d2d.size, 40.0), np.ones(d2d.size, bool), cfg, rng(3))
    means = rssi.reshape(3, -1).mean(axis=1)
    assert np.all(np.diff(means) < 0)


def _mean_model_rssi(d2d, h, cfg):
    return cfg.channel.tx_power - channel.mean_path_loss_db(d2d, h, cfg.channel)


def test_rssi_inversion_round_trip_grid(table):
    cfg = MeasurementConfig(fading=False)
    d2d, h = np.meshgrid(np.linspace(1, 1000, 60), np.linspace(20, 120, 25))
    d2d, h = d2d.ravel(), h.ravel()
    d_est, ok = measurement.estimate_distance_from_rssi(_mean_model_rssi(d2d, h, cfg), h, table, cfg)
    assert ok.all()
    true = np.hypot(d2d, h)
    assert np.max(np.abs(d_est / true - 1)) < 0.005


def test_rssi_inversion_exact_model():
    cfg = MeasurementConfig(fading=False)
    d2d, h = np.array([5.0, 150.0, 700.0]), np.array([25.0, 60.0, 110.0])
    d_est, ok = measurement.estimate_distance_from_rssi(_mean_model_rssi(d2d, h, cfg), h, None, cfg)
    np.testing.assert_allclose(d_est, np.hypot(d2d, h), atol=0.1)


def test_fading_bias_shortens_estimate():
    # constant exponent 2 on LOS-only geometry: +10 dB -> 10 ** 0.5 shorter
    ch = ChannelParams()
    cfg = MeasurementConfig(channel=ch)
    d = 400.0
    rssi = ch.tx_power - ch.ref_pathloss_1m - 20 * np.log10(d)
    budget = ch.tx_power - ch.ref_pathloss_1m - (rssi + 10.0)
    assert 10 ** (budget / 20) == pytest.approx(d / 10**0.5)
    # and the estimator honours the same law where eta is flat (inside d1)
    h = 30.0
    d3d = np.hypot(15.0, h)
    eta = channel.mean_path_loss_exponent(15.0, h)
    r = ch.tx_power - ch.ref_pathloss_1m - 10 * eta * np.log10(d3d)
    est, _ = measurement.estimate_distance_from_rssi(r + 10.0, h, None, cfg)
    assert est[0] == pytest.approx(max(d3d / 10 ** (1 / eta), 1.0), rel=1e-3)


def test_inversion_rejects_nonfinite(table):
    with pytest.raises(ValueError):
        measurement.estimate_distance_from_rssi([np.nan], 30.0, table, MeasurementConfig())


def test_inversion_clamps(table):
    cfg = MeasurementConfig()
    d, _ = measurement.estimate_distance_from_rssi([100.0, -500.0], 30.0, table, cfg)
    assert d[0] == pytest.approx(measurement.D_EST_MIN) and d[1] == pytest.approx(measurement.D_EST_MAX)


def test_kappa_anchor():
    cfg = MeasurementConfig()
    ch = cfg.channel
    pl = ch.ref_pathloss_1m + 10 * channel.los_exponent(30.0) * np.log10(100.0)
    snr = 10 ** ((ch.tx_power - pl - ch.noise_floor) / 10)
    assert measurement.tdoa_noise_std(snr, cfg) == pytest.approx(1.0, rel=1e-12)


def test_noise_std_scaling():
    cfg = MeasurementConfig()
    assert measurement.tdoa_noise_std(2e4, cfg) == pytest.approx(measurement.tdoa_noise_std(1e4, cfg) / np.sqrt(2))
    # SNR proportional to d ** -eta
    s100, s200 = 100.0 ** -2.3, 200.0 ** -2.3
    ratio = measurement.tdoa_noise_std(s200 * 1e9, cfg) / measurement.tdoa_noise_std(s100 * 1e9, cfg)
    assert ratio == pytest.approx(2 ** 1.15, rel=1e-12)
    assert ratio == pytest.approx(2.22, abs=0.005)
    with pytest.raises(ValueError):
        measurement.tdoa_noise_std(0.0, cfg)


@pytest.mark.parametrize("kw", [dict(sinr_interference_factor=0.0), dict(nuisance_loss=1.5), dict(sync_model="x"), dict(sync_residual_std=-1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        MeasurementConfig(**kw)


def _scene(seed=0, cfg=None, h=30.0):
    cfg = cfg or MeasurementConfig()
    dep = topology.generate_hex_grid(90.0, 3, rng(seed))
    dep = topology.place_uav(dep, 20.0, h, bearing=1.0)
    links = measurement.observe_links(dep, cfg, None, rng(seed + 1), rng(seed + 2))
    return dep, links, cfg


def test_observe_links_invariants():
    dep, links, _ = _scene()
    assert [l.node_id for l in links] == sorted(dep.ids.tolist())
    for l in links:
        assert l.d_est > 0 and np.isfinite(l.d_est) and l.snr > 0


def test_tdoa_noiseless_exact():
    cfg = MeasurementConfig(sync_residual_std=0.0, tdoa_noise_scale=0.0)
    dep, links, _ = _scene(cfg=cfg)
    ids = [0, 3, 5, 9]
    meas = measurement.synthesize_tdoa(dep, ids, links, cfg, rng(4))
    d3d = {l.node_id: l.true_d3d for l in links}
    assert [m.node_pair for m in meas] == [(0, 3), (0, 5), (0, 9)]
    for m in meas:
        assert m.range_diff == d3d[m.node_pair[1]] - d3d[0]


def test_tdoa_needs_three():
    dep, links, cfg = _scene()
    with pytest.raises(ValueError):
        measurement.synthesize_tdoa(dep, [0, 1], links, cfg, rng())


def test_tdoa_common_random_numbers():
    dep, links, cfg = _scene()
    a = measurement.synthesize_tdoa(dep, [0, 1, 2, 3], links, cfg, rng(7))
    b = measurement.synthesize_tdoa(dep, [0, 1, 2, 3, 4, 5], links, cfg, rng(7))
    assert [m.range_diff for m in a] == [m.range_diff for m in b[:3]]


def test_sync_contribution():
    assert SPEED_OF_LIGHT * np.sqrt(2) * 1e-9 == pytest.approx(0.42, abs=0.005)


def test_noise_budget_additivity():
    dep, links, cfg = _scene()
    by_id = {l.node_id: l for l in links}
    ids = [0, 4]
    n = 100_000
    r = rng(9)
    draws = np.array([measurement.synthesize_tdoa(dep, ids + [6], links, cfg, r)[0].range_diff for _ in range(n)])
    true = by_id[4].true_d3d - by_id[0].true_d3d
    s_n = measurement.tdoa_noise_std(by_id[4].snr, cfg)
    s_r = measurement.tdoa_noise_std(by_id[0].snr, cfg)
    expect = np.sqrt(s_n**2 + s_r**2 + 2 * (SPEED_OF_LIGHT * cfg.sync_residual_std) ** 2)
    assert abs(draws.mean() - true) < 5 * expect / np.sqrt(n)
    assert draws.std() == pytest.approx(expect, rel=0.02)


def test_per_node_full_sync_is_large():
    cfg = dataclasses.replace(MeasurementConfig(), sync_model="per_node_full")
    dep, links, _ = _scene(cfg=cfg)
    draws = np.array([measurement.synthesize_tdoa(dep, [0, 1, 2], links, cfg, rng(s))[0].range_diff for s in range(400)])
    assert draws.std() > 100.0


def test_observations_deterministic():
    _, a, _ = _scene(seed=3)
    _, b, _ = _scene(seed=3)
    assert a == b


@settings(max_examples=60, deadline=None)
@given(d2d=st.floats(1.0, 1000.0), h=st.floats(20.0, 120.0))
def test_inversion_converges_on_domain(table, d2d, h):
    cfg = MeasurementConfig(fading=False)
    d, ok = measurement.estimate_distance_from_rssi(_mean_model_rssi(d2d, h, cfg), h, table, cfg)
    assert ok.all()
    assert d[0] == pytest.approx(np.hypot(d2d, h), rel=0.005)
