"""Quadrature-level simulation of the transmitter, channel and receiver.

Frames are Gaussian-modulated coherent states. The round trip is simulated
either honestly (target reflection) or through an intercept-resend spoofer
that heterodynes both quadratures and re-prepares a coherent state.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .core import (
    ProtocolConfig,
    ReceiveFrame,
    Scenario,
    TransmitFrame,
    WindowOverflowError,
    derive_channel,
)

__all__ = [
    "ChannelMode",
    "ChannelNoiseBreakdown",
    "modulate",
    "honest_roundtrip",
    "spoof_roundtrip",
    "snr_analytic",
    "project_quadrature",
    "dump_frame",
    "load_frame",
]


class ChannelMode(str, enum.Enum):
    AGGREGATE = "aggregate"
    TERM_BY_TERM = "term"


@dataclass(frozen=True)
class ChannelNoiseBreakdown:
    """Per-sample contributions to a measurement record.

    ``vacuum_terms`` maps the name of each vacuum source to its contribution
    after all losses; the emitted measurement is the sum of every term, added
    in the order signal, vacuum terms (insertion order), excess, detector.
    """

    signal_term: np.ndarray
    vacuum_terms: dict
    excess_term: np.ndarray
    detector_term: np.ndarray

    def total(self) -> np.ndarray:
        out = self.signal_term.copy()
        for term in self.vacuum_terms.values():
            out += term
        out += self.excess_term
        out += self.detector_term
        return out


def modulate(config: ProtocolConfig, stream: np.random.Generator) -> TransmitFrame:
    """Draw a frame: Rayleigh amplitudes, uniform phases, fair basis bits."""
    m = config.frame_length
    amplitude = stream.rayleigh(math.sqrt(config.modulation_variance), m)
    theta = stream.uniform(0.0, 2.0 * math.pi, m)
    bits = stream.integers(0, 2, config.window_length, dtype=np.uint8)
    return TransmitFrame(amplitude * np.cos(theta), amplitude * np.sin(theta), bits)


def project_quadrature(u, v, bits, delta: float) -> np.ndarray:
    """Quadrature selected by ``bits`` after rotating the pair (u, v) by delta.

    bit 0 reads ``u cos d - v sin d``, bit 1 reads ``u sin d + v cos d``.
    """
    c, s = math.cos(delta), math.sin(delta)
    return np.where(bits.astype(bool), u * s + v * c, u * c - v * s)


def _check_window(frame: TransmitFrame, config: ProtocolConfig) -> Tuple[int, int]:
    start = config.true_delay
    stop = start + frame.frame_length
    if stop > config.window_length:
        raise WindowOverflowError(
            f"true_delay + frame_length = {stop} exceeds receive window "
            f"{config.window_length}"
        )
    if frame.basis_bits.shape[0] != config.window_length:
        raise ValueError("basis bits must span the receive window")
    return start, stop


def _signal(frame: TransmitFrame, config: ProtocolConfig, span) -> np.ndarray:
    """Noise-free rotated quadrature ``A cos/sin(theta + delta)`` on the window."""
    start, stop = span
    out = np.zeros(config.window_length)
    out[start:stop] = project_quadrature(
        frame.x_quadrature,
        frame.p_quadrature,
        frame.basis_bits[start:stop],
        config.phase_drift,
    )
    return out


def honest_roundtrip(
    frame: TransmitFrame,
    config: ProtocolConfig,
    stream: np.random.Generator,
    mode: ChannelMode = ChannelMode.AGGREGATE,
) -> ReceiveFrame:
    span = _check_window(frame, config)
    ch = derive_channel(config)
    eta = ch.eta_total_honest
    n = config.window_length
    signal = math.sqrt(eta) * _signal(frame, config, span)

    if ChannelMode(mode) is ChannelMode.AGGREGATE:
        noise = stream.normal(0.0, math.sqrt(ch.noise_var_honest), n)
        return ReceiveFrame(signal + noise, Scenario.HONEST, config.true_delay)

    c = config
    eta_c2r = c.channel_transmittance**2 * c.target_reflectivity
    x0, x1, x2 = (stream.standard_normal(n) for _ in range(3))
    x_eps = stream.normal(0.0, math.sqrt(c.excess_noise), n)
    x_d = stream.normal(0.0, math.sqrt(c.detector_noise), n)
    breakdown = ChannelNoiseBreakdown(
        signal_term=signal,
        vacuum_terms={
            "X0": math.sqrt(eta) * x0,
            "X1": math.sqrt(c.detector_efficiency * (1.0 - eta_c2r)) * x1,
            "X2": math.sqrt(1.0 - c.detector_efficiency) * x2,
        },
        excess_term=math.sqrt(eta) * x_eps,
        detector_term=x_d,
    )
    return ReceiveFrame(
        breakdown.total(), Scenario.HONEST, config.true_delay, breakdown=breakdown
    )


def spoof_roundtrip(
    frame: TransmitFrame,
    config: ProtocolConfig,
    stream: np.random.Generator,
    mode: ChannelMode = ChannelMode.TERM_BY_TERM,
) -> ReceiveFrame:
    """Intercept-resend round trip.

    The spoofer sits behind one pass of the channel, heterodynes both
    quadratures (3 dB penalty), scales its data by the gain, re-prepares a
    coherent state and sends it back through the channel. The same phase
    drift is applied end to end. Outside the signal span the spoofer emits
    no signal but the noise chain is unchanged.
    """
    span = _check_window(frame, config)
    ch = derive_channel(config)
    eta_p = ch.eta_total_spoof
    n = config.window_length
    signal = math.sqrt(eta_p) * _signal(frame, config, span)

    if ChannelMode(mode) is ChannelMode.AGGREGATE:
        noise = stream.normal(0.0, math.sqrt(ch.noise_var_spoof), n)
        return ReceiveFrame(signal + noise, Scenario.SPOOFED, config.true_delay)

    c = config
    eta_c, eta_d, gamma = c.channel_transmittance, c.detector_efficiency, c.spoofer_gain
    bits, delta = frame.basis_bits, c.phase_drift

    def pair(std=1.0):
        return stream.normal(0.0, std, n), stream.normal(0.0, std, n)

    vac0 = pair()
    eps = pair(math.sqrt(c.excess_noise))
    vac3 = pair()
    vac4 = pair()
    x5 = stream.standard_normal(n)
    x6 = stream.standard_normal(n)
    x_d = stream.normal(0.0, math.sqrt(c.detector_noise), n)

    # gains from each source to the receiver's homodyne output
    g_front = math.sqrt(eta_c * eta_d * gamma * eta_c / 2.0)  # equals sqrt(eta_p)
    g_het = math.sqrt(eta_c * eta_d * gamma * (1.0 - eta_c / 2.0))
    g_prep = math.sqrt(eta_c * eta_d)
    breakdown = ChannelNoiseBreakdown(
        signal_term=signal,
        vacuum_terms={
            "X0": g_front * project_quadrature(*vac0, bits, delta),
            "X3": g_het * project_quadrature(*vac3, bits, delta),
            "X4": g_prep * project_quadrature(*vac4, bits, delta),
            "X5": math.sqrt(eta_d * (1.0 - eta_c)) * x5,
            "X6": math.sqrt(1.0 - eta_d) * x6,
        },
        excess_term=g_front * project_quadrature(*eps, bits, delta),
        detector_term=x_d,
    )
    return ReceiveFrame(
        breakdown.total(), Scenario.SPOOFED, config.true_delay, breakdown=breakdown
    )


def snr_analytic(config: ProtocolConfig, scenario: Scenario = Scenario.HONEST) -> float:
    eta, noise = derive_channel(config).for_scenario(scenario)
    return eta * config.modulation_variance / noise


def dump_frame(path, frame: TransmitFrame, receive: ReceiveFrame) -> int:
    """Write ``index,X_T,P_T,B,R`` rows over the receive window.

    Frame quadratures sit at their true window position; other rows carry
    ``nan``. Returns the number of data rows.
    """
    n = receive.measurements.shape[0]
    x = np.full(n, np.nan)
    p = np.full(n, np.nan)
    start = receive.true_delay
    x[start : start + frame.frame_length] = frame.x_quadrature
    p[start : start + frame.frame_length] = frame.p_quadrature
    with open(Path(path), "w") as fh:
        fh.write("index,X_T,P_T,B,R\n")
        for j in range(n):
            fh.write(
                f"{j},{float(x[j])!r},{float(p[j])!r},{int(frame.basis_bits[j])},"
                f"{float(receive.measurements[j])!r}\n"
            )
    return n


def load_frame(path):
    """Inverse of :func:`dump_frame`; returns (index, X_T, P_T, B, R) arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return (
        data["index"].astype(int),
        data["X_T"],
        data["P_T"],
        data["B"].astype(np.uint8),
        data["R"],
    )
