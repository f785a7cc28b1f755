import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlidar.analytics import config_for_snr
from qlidar.core import ProtocolConfig, derive_channel
from qlidar.estimation import (
    DegenerateRegressorError,
    NoiseEstimate,
    estimate_parameters,
    read_roc,
    security_decide,
    security_roc_analytic,
    target_roc_analytic,
    write_roc,
    xi_threshold_for_pfa,
)
from qlidar.sweeps import PAPER_BASE

CFG = ProtocolConfig()


def test_noiseless_regression_is_exact():
    rng = np.random.default_rng(0)
    t1 = rng.normal(0, 30, 1000)
    est = estimate_parameters(t1, 0.01 * t1, CFG)
    assert est.sqrt_eta_hat == pytest.approx(0.01, rel=1e-13)
    assert est.vn_hat == pytest.approx(0.0, abs=1e-20)
    assert est.v_eps_hat == pytest.approx(-1.05)
    assert est.sample_count == 1000


def test_degenerate_and_malformed_inputs():
    with pytest.raises(DegenerateRegressorError):
        estimate_parameters(np.zeros(10), np.ones(10), CFG)
    with pytest.raises(ValueError):
        estimate_parameters(np.ones(10), np.ones(9), CFG)


def test_plug_in_variances():
    rng = np.random.default_rng(1)
    t1 = rng.normal(0, math.sqrt(1000), 50_000)
    r = 0.01 * t1 + rng.normal(0, math.sqrt(1.05), t1.size)
    est = estimate_parameters(t1, r, CFG)
    m = t1.size
    assert est.var_v_eps == pytest.approx(2 * est.vn_hat**2 / m)
    eta = est.sqrt_eta_hat**2
    assert est.var_sqrt_eta == pytest.approx((2 * eta + est.vn_hat / 1000) / m, rel=1e-12)


def regression_ensemble(snr_db, m=1000, trials=4000, seed=2):
    vm, vn = 1000.0, 1.05
    eta = 10 ** (snr_db / 10) * vn / vm
    rng = np.random.default_rng(seed)
    t1 = rng.normal(0, math.sqrt(vm), (trials, m))
    r = math.sqrt(eta) * t1 + rng.normal(0, math.sqrt(vn), (trials, m))
    est = [estimate_parameters(a, b, CFG) for a, b in zip(t1, r)]
    return eta, vm, vn, m, np.array([e.sqrt_eta_hat for e in est]), np.array([e.vn_hat for e in est])


def test_slope_variance_is_exact_least_squares_variance():
    # the least-squares slope has variance V_N / (V_M (M - 2)), smaller than
    # the correlation-estimator variance by roughly 1 + 2 SNR
    eta, vm, vn, m, s, _ = regression_ensemble(-10.0)
    n = s.size
    assert abs(s.mean() - math.sqrt(eta)) <= 3 * s.std() / math.sqrt(n)
    exact = vn / (vm * (m - 2))
    assert abs(s.var(ddof=1) - exact) <= 3 * exact * math.sqrt(2 / (n - 1))
    loose = (2 * eta + vn / vm) / m
    assert loose / exact > 1.15


def test_noise_estimate_is_chi_square():
    _, _, vn, m, _, v = regression_ensemble(-10.0, seed=3)
    scaled = m * v / vn
    n = scaled.size
    assert abs(scaled.mean() - (m - 1)) <= 3 * math.sqrt(2 * (m - 1) / n)
    assert abs(scaled.var(ddof=1) - 2 * (m - 1)) <= 3 * 2 * (m - 1) * math.sqrt(2 / (n - 1))


def estimate(v_eps, sqrt_eta=0.01, m=10**6):
    return NoiseEstimate(sqrt_eta, v_eps + 1.05, v_eps, 0.0, 2 * 1.05**2 / m, m)


def test_security_decision_semantics():
    cfg = CFG.replace(excess_noise_threshold=30.0)
    low = security_decide(estimate(5e-6), cfg)
    assert not low.spoof_detected
    assert low.v_eps_threshold == pytest.approx(1e-4 * 30.0)
    honest_vn = 1e-4 * 0.05 + 1.05
    expect = 0.5 * math.erfc((3e-3 - 5e-6) / math.sqrt(2 * 2 * honest_vn**2 / 10**6))
    assert low.p_value_context == pytest.approx(expect, rel=1e-12)
    # boundary: equality is not an alarm
    th = 0.01**2 * 30.0
    assert not security_decide(estimate(th), cfg).spoof_detected
    assert security_decide(estimate(math.nextafter(th, 1)), cfg).spoof_detected


@pytest.mark.parametrize("gamma", [0.1, 0.2, 0.3])
def test_spoof_scale_excess_raises_alarm(gamma):
    cfg = PAPER_BASE.replace(frame_length=10**6, spoofer_gain=gamma)
    ch = derive_channel(cfg)
    xi_th = xi_threshold_for_pfa(cfg, 1e-3)
    v = ch.eta_total_spoof * ch.spoof_excess
    verdict = security_decide(estimate(v, math.sqrt(ch.eta_total_spoof)), cfg.replace(excess_noise_threshold=xi_th))
    assert verdict.spoof_detected


def test_security_roc_limits_and_monotonicity():
    cfg = PAPER_BASE.replace(frame_length=10**6)
    grid = np.linspace(-1000, 1000, 2001)
    roc = security_roc_analytic(cfg, grid)
    assert roc.shape == (2001, 2)
    assert np.all((roc >= 0) & (roc <= 1))
    assert np.all(np.diff(roc, axis=0) <= 0)
    assert security_roc_analytic(cfg, [-1e9])[0] == pytest.approx([1.0, 1.0])
    assert security_roc_analytic(cfg, [1e9])[0] == pytest.approx([0.0, 0.0])


@given(
    gamma=st.floats(0.01, 1.0),
    ec=st.floats(0.005, 0.5),
    m=st.integers(10**4, 10**7),
    frac=st.floats(0.0, 1.0),
)
def test_detection_dominates_false_alarm(gamma, ec, m, frac):
    cfg = PAPER_BASE.replace(spoofer_gain=gamma, channel_transmittance=ec, frame_length=m)
    ch = derive_channel(cfg)
    # thresholds between the honest and attacked excess-noise levels
    xi = cfg.excess_noise + frac * (ch.spoof_excess - cfg.excess_noise)
    p_fa, p_d = security_roc_analytic(cfg, [xi])[0]
    assert p_fa <= 0.5 <= p_d
    assert p_d >= p_fa


def test_xi_threshold_round_trip():
    cfg = PAPER_BASE.replace(frame_length=10**6)
    for p in (0.5, 0.1, 1e-3, 1e-6):
        xi = xi_threshold_for_pfa(cfg, p)
        assert security_roc_analytic(cfg, [xi])[0, 0] == pytest.approx(p, rel=1e-9)


def test_security_operating_points():
    cfg = PAPER_BASE.replace(frame_length=10**6, spoofer_gain=0.2)
    xi = xi_threshold_for_pfa(cfg, 1e-3)
    assert abs(security_roc_analytic(cfg, [xi])[0, 1] - 0.91) <= 0.04
    weak = cfg.replace(channel_transmittance=math.sqrt(1e-4))  # eta = 1e-5
    xi = xi_threshold_for_pfa(weak, 1e-3)
    assert security_roc_analytic(weak, [xi])[0, 1] < 0.05


def test_target_roc_basics():
    cfg = config_for_snr(-15.0, PAPER_BASE)
    assert target_roc_analytic(cfg, [0.0])[0, 0] == pytest.approx(0.5)
    k = np.linspace(0, 6, 61)
    r10 = target_roc_analytic(cfg, k, length=2**10)
    r11 = target_roc_analytic(cfg, k, length=2**11)
    assert np.allclose(r10[:, 0], r11[:, 0], rtol=1e-12, atol=0)
    assert np.all(r11[:, 1] >= r10[:, 1])
    diag = target_roc_analytic(cfg.replace(phase_drift=math.pi / 4), k)
    assert np.all(diag[:, 1] <= target_roc_analytic(cfg, k)[:, 1])
    assert np.all(np.diff(r11, axis=0) <= 0)


def test_roc_file_round_trip(tmp_path):
    rows = [(0.1, 0.2, 0.3, "honest+spoofed", "analytic"), (1 / 3, 1e-300, 1.0, "x", "montecarlo")]
    path = tmp_path / "roc.csv"
    assert write_roc(path, rows) == 2
    assert read_roc(path) == rows
    assert path.read_text().splitlines()[0] == "threshold,p_fa,p_d,scenario,source"
