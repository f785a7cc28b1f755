import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlidar.analytics import (
    config_for_snr,
    erfc,
    invert_threshold,
    noise_floor_variance,
    peak_variance,
    snr_db,
    tail_probability,
)
from qlidar.core import ProtocolConfig, Scenario
from qlidar.optics import snr_analytic

mpmath.mp.dps = 50


def test_erfc_against_high_precision_reference():
    xs = np.concatenate([np.linspace(-10, 10, 2001), [-9.99, 5.5e-9, 0.47693627620446987]])
    worst = 0.0
    for x in xs:
        ref = mpmath.erfc(mpmath.mpf(float(x)))
        rel = abs((mpmath.mpf(erfc(float(x))) - ref) / ref)
        worst = max(worst, float(rel))
    assert worst <= 1e-12


def test_erfc_examples():
    assert erfc(0.0) == 1.0
    assert erfc(math.sqrt(2)) == pytest.approx(0.0455002638963584, rel=1e-14)
    assert isinstance(erfc(1.0), float)
    assert erfc(np.array([0.0, 1.0])).shape == (2,)


@given(st.floats(-10, 10))
def test_erfc_reflection(x):
    assert erfc(-x) == pytest.approx(2.0 - erfc(x), abs=1e-15)


def test_two_sigma_false_alarm():
    assert tail_probability(2.0, 0.0, 1.0) == pytest.approx(0.02275013194817921, rel=1e-12)


def test_invert_threshold_examples():
    assert invert_threshold(0.5, 3.0, 2.0) == pytest.approx(3.0, abs=1e-12)
    v = 7.0
    th = invert_threshold(0.023, 0.0, v)
    # 0.023 is a rounding of 0.02275, so the threshold only sits near 2 sigma
    assert abs(th / math.sqrt(v) - 2.0) < 0.005
    exact = invert_threshold(float(tail_probability(2 * math.sqrt(v), 0.0, v)), 0.0, v)
    assert exact == pytest.approx(2 * math.sqrt(v), abs=1e-6)


@given(p=st.floats(1e-12, 1 - 1e-9), mean=st.floats(-100, 100), var=st.floats(1e-6, 1e6))
def test_invert_threshold_round_trip(p, mean, var):
    th = invert_threshold(p, mean, var)
    assert float(tail_probability(th, mean, var)) == pytest.approx(p, rel=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_invert_threshold_rejects_unattainable(p):
    with pytest.raises(ValueError):
        invert_threshold(p, 0.0, 1.0)


def test_invert_threshold_rejects_bad_variance():
    with pytest.raises(ValueError):
        invert_threshold(0.1, 0.0, 0.0)


def test_noise_floor_forms_agree():
    eta, vm, vn, n = 1e-4, 1000.0, 1.05, 2048
    snr = eta * vm / vn
    assert noise_floor_variance(eta, vm, vn, n) == pytest.approx(
        eta * vm**2 / n * (1 + 1 / snr), rel=1e-12
    )
    assert peak_variance(eta, vm, vn, n, 1.0) == pytest.approx(
        eta * vm**2 / n + noise_floor_variance(eta, vm, vn, n), rel=1e-12
    )
    assert noise_floor_variance(0.0, vm, vn, n) == vm * vn / n


@pytest.mark.parametrize("db", [-30.0, -20.0, -15.0, -10.2, -5.0])
def test_config_for_snr_hits_target(db):
    cfg = config_for_snr(db)
    assert snr_db(snr_analytic(cfg)) == pytest.approx(db, abs=1e-9)


def test_config_for_snr_spoofed():
    cfg = config_for_snr(-15.0, scenario=Scenario.SPOOFED)
    assert snr_db(snr_analytic(cfg, Scenario.SPOOFED)) == pytest.approx(-15.0, abs=1e-9)


def test_config_for_snr_unreachable():
    with pytest.raises(ValueError):
        config_for_snr(20.0, ProtocolConfig(modulation_variance=10.0))
