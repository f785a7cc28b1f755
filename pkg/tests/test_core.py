import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlidar.core import (
    ConfigError,
    ProtocolConfig,
    Scenario,
    derive_channel,
    format_config,
    make_stream,
    parse_config,
    spawn_streams,
    trial_stream,
    validate_config,
)


def test_defaults_are_valid():
    cfg = ProtocolConfig()
    assert validate_config(cfg) is cfg
    assert cfg.target_reflectivity == 0.1
    assert cfg.detector_efficiency == 1.0
    assert cfg.detector_noise == 0.05


def test_zero_transmittance_rejected():
    with pytest.raises(ConfigError) as info:
        validate_config(ProtocolConfig(channel_transmittance=0.0))
    assert "channel_transmittance out of (0,1]" in info.value.violations


def test_ranging_longer_than_frame_rejected():
    with pytest.raises(ConfigError) as info:
        validate_config(ProtocolConfig(frame_length=100, ranging_length=200))
    assert "ranging_length exceeds frame_length" in info.value.violations


def test_every_violation_is_listed():
    bad = ProtocolConfig(
        channel_transmittance=2.0, target_reflectivity=-1.0, spoofer_gain=0.0
    )
    with pytest.raises(ConfigError) as info:
        validate_config(bad)
    text = " ".join(info.value.violations)
    assert "channel_transmittance" in text
    assert "target_reflectivity" in text
    assert "spoofer_gain" in text


def test_window_overflow_rejected():
    with pytest.raises(ConfigError, match="exceeds receive_window_length"):
        validate_config(
            ProtocolConfig(frame_length=1000, ranging_length=100, receive_window_length=1500)
        )


def test_window_default_follows_replace():
    cfg = ProtocolConfig(frame_length=1000, ranging_length=100, true_delay=10)
    assert cfg.window_length == 2010
    assert cfg.replace(frame_length=500).window_length == 1010


def test_derived_honest_transmission():
    ch = derive_channel(ProtocolConfig(channel_transmittance=math.sqrt(1e-3)))
    assert ch.eta_total_honest == pytest.approx(1e-4, rel=1e-12)
    assert ch.noise_var_honest == pytest.approx(1e-4 * 0.05 + 1.05, rel=1e-12)


def test_spoof_transmission_matches_at_twice_reflectivity():
    ch = derive_channel(ProtocolConfig(spoofer_gain=0.2))
    assert ch.eta_total_spoof == pytest.approx(1e-4, rel=1e-12)
    assert ch.eta_total_spoof == pytest.approx(ch.eta_total_honest, rel=1e-12)


def test_spoof_excess_gap():
    ch = derive_channel(ProtocolConfig(channel_transmittance=0.0316))
    assert abs(ch.spoof_excess - 0.05 - 63.3) <= 0.1


unit = st.floats(1e-4, 1.0)


@given(ec=unit, er=unit, ed=unit, vd=st.floats(0, 1), xi=st.floats(0, 1))
def test_identity_when_gain_is_twice_reflectivity(ec, er, ed, vd, xi):
    cfg = ProtocolConfig(
        channel_transmittance=ec,
        target_reflectivity=er,
        detector_efficiency=ed,
        detector_noise=vd,
        excess_noise=xi,
        spoofer_gain=2 * er,
    )
    ch = derive_channel(cfg)
    assert ch.eta_total_spoof == pytest.approx(ch.eta_total_honest, rel=1e-12)


@given(ec=unit, er=unit, ed=unit, g=st.floats(1e-3, 10), vd=st.floats(0, 1), xi=st.floats(0, 1))
def test_noise_variances_bounded_below(ec, er, ed, g, vd, xi):
    cfg = ProtocolConfig(
        channel_transmittance=ec,
        target_reflectivity=er,
        detector_efficiency=ed,
        detector_noise=vd,
        excess_noise=xi,
        spoofer_gain=g,
    )
    ch = derive_channel(cfg)
    assert ch.noise_var_honest >= vd + 1
    assert ch.noise_var_spoof >= vd + 1
    assert derive_channel(cfg) == ch


def test_for_scenario():
    ch = derive_channel(ProtocolConfig())
    assert ch.for_scenario(Scenario.HONEST) == (ch.eta_total_honest, ch.noise_var_honest)
    assert ch.for_scenario("spoofed") == (ch.eta_total_spoof, ch.noise_var_spoof)


def test_streams_are_reproducible_and_independent():
    a = make_stream(7).standard_normal(5)
    b = make_stream(7).standard_normal(5)
    assert np.array_equal(a, b)
    s = spawn_streams(7, 3)
    assert np.array_equal(s[2].standard_normal(4), trial_stream(7, 2).standard_normal(4))
    # stream k does not depend on how many were spawned
    assert np.array_equal(spawn_streams(7, 5)[1].random(3), spawn_streams(7, 2)[1].random(3))
    assert not np.array_equal(trial_stream(7, 0).random(3), trial_stream(7, 1).random(3))
    spawned = np.random.SeedSequence(7).spawn(3)[2]
    assert np.array_equal(make_stream(spawned).random(3), trial_stream(7, 2).random(3))


def test_parse_round_trip():
    cfg = ProtocolConfig(spoofer_gain=0.3, frame_length=5000, ranging_length=512, rng_seed=11)
    assert parse_config(format_config(cfg)) == cfg


def test_parse_comments_and_blank_lines():
    cfg = parse_config("# header\n\nspoofer_gain = 0.1  # inline\nframe_length=2e4\n")
    assert cfg.spoofer_gain == 0.1
    assert cfg.frame_length == 20000


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("bogus = 1", "unknown key"),
        ("spoofer_gain = 0.1\nspoofer_gain = 0.2", "duplicate key"),
        ("frame_length = 1.5", "expected an integer"),
        ("spoofer_gain 0.1", "expected 'key = value'"),
        ("spoofer_gain = abc", "could not convert"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_parse_validates():
    with pytest.raises(ConfigError, match="channel_transmittance"):
        parse_config("channel_transmittance = 0")
