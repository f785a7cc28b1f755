"""Cross-correlation ranging and phase-drift recovery."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sp_fft

from . import kernels
from .analytics import noise_floor_variance
from .core import ProtocolConfig, ReceiveFrame, TransmitFrame, derive_channel

__all__ = [
    "ConstructedSequences",
    "CorrelationProfile",
    "RangingVerdict",
    "PhaseUndefinedError",
    "InsufficientOverlapError",
    "build_sequences",
    "moving_cross_correlation",
    "detect_target",
    "estimate_phase",
    "compensate_phase",
    "aligned_segment",
    "aligned_correlation",
    "write_profile",
    "read_profile",
]

# lag-scan work (L * lags) above which the FFT path is used in "auto" mode
FFT_CROSSOVER = 1 << 17
_CHI2_1_MEDIAN = 0.454936423119572694


class PhaseUndefinedError(ValueError):
    pass


class InsufficientOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class ConstructedSequences:
    t1: np.ndarray
    t2: np.ndarray


@dataclass(frozen=True)
class CorrelationProfile:
    lags: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c_max: float
    peak_lag: int
    mu1_hat: float
    mu2_hat: float
    length: int

    def at(self, lag: int) -> tuple[float, float]:
        idx = int(np.searchsorted(self.lags, lag))
        if idx >= len(self.lags) or self.lags[idx] != lag:
            raise KeyError(f"lag {lag} not in profile")
        return float(self.c1[idx]), float(self.c2[idx])


@dataclass(frozen=True)
class RangingVerdict:
    detected: bool
    estimated_delay: int
    threshold_used: float
    phase_estimate: float
    noise_floor_std: float


def build_sequences(frame: TransmitFrame, window_bits) -> ConstructedSequences:
    """T1 = (1-B) X + B P and T2 = B X - (1-B) P, elementwise."""
    b = np.asarray(window_bits)
    if b.shape != frame.x_quadrature.shape:
        raise ValueError(
            f"basis bits ({b.shape[0] if b.ndim else 0}) and frame "
            f"({frame.frame_length}) differ in length"
        )
    b = b.astype(bool)
    x, p = frame.x_quadrature, frame.p_quadrature
    return ConstructedSequences(t1=np.where(b, p, x), t2=np.where(b, x, -p))


def _fft_xcorr(x, p, bits, r, length, nlags):
    need = length + nlags - 1
    b = np.asarray(bits[:need]).astype(bool)
    r = np.asarray(r[:need], dtype=np.float64)
    r1 = np.where(b, r, 0.0)
    r0 = r - r1
    n = sp_fft.next_fast_len(need, real=True)
    f0 = sp_fft.rfft(r0, n)
    f1 = sp_fft.rfft(r1, n)
    fx = np.conj(sp_fft.rfft(x[:length], n))
    fp = np.conj(sp_fft.rfft(p[:length], n))
    c1 = sp_fft.irfft(f0 * fx + f1 * fp, n)[:nlags] / length
    c2 = sp_fft.irfft(f1 * fx - f0 * fp, n)[:nlags] / length
    return c1, c2


def moving_cross_correlation(
    frame: TransmitFrame,
    receive: ReceiveFrame,
    length: int,
    method: str = "auto",
    lags: Optional[Sequence[int]] = None,
) -> CorrelationProfile:
    """Correlate the first ``length`` frame samples against every full-overlap lag.

    At lag ``d`` the constructed sequences use the basis bits at receive
    positions ``d .. d+length-1``. ``method`` is ``"direct"`` (selected
    kernel), ``"fft"`` or ``"auto"``. Passing ``lags`` evaluates only those
    lags, always by direct summation.
    """
    r = receive.measurements
    bits = frame.basis_bits
    length = int(length)
    if not 1 <= length <= frame.frame_length:
        raise ValueError(f"correlation length {length} outside [1, {frame.frame_length}]")
    if bits.shape[0] != r.shape[0]:
        raise ValueError("basis bits and receive window differ in length")
    nlags = r.shape[0] - length + 1
    if nlags < 1:
        raise InsufficientOverlapError("receive window shorter than correlation length")

    x, p = frame.x_quadrature, frame.p_quadrature
    if lags is not None:
        lag_arr = np.unique(np.asarray(lags, dtype=np.int64))
        if lag_arr.size == 0 or lag_arr[0] < 0 or lag_arr[-1] >= nlags:
            raise InsufficientOverlapError("requested lag has no full overlap")
        c1 = np.empty(lag_arr.size)
        c2 = np.empty(lag_arr.size)
        for k, d in enumerate(lag_arr):
            a, b = kernels.lagged_xcorr(x, p, bits[d:], r[d:], length, 1)
            c1[k], c2[k] = a[0], b[0]
    else:
        lag_arr = np.arange(nlags)
        if method == "auto":
            method = "fft" if length * nlags > FFT_CROSSOVER else "direct"
        if method == "direct":
            c1, c2 = kernels.lagged_xcorr(x, p, bits, r, length, nlags)
        elif method == "fft":
            c1, c2 = _fft_xcorr(x, p, bits, r, length, nlags)
        else:
            raise ValueError(f"unknown method {method!r}")

    mag = np.maximum(np.abs(c1), np.abs(c2))
    k = int(np.argmax(mag))  # first maximum -> smallest lag wins ties
    c_max = float(mag[k])
    norm = math.hypot(c1[k], c2[k])
    mu1, mu2 = (c1[k] / norm, c2[k] / norm) if norm > 0 else (math.nan, math.nan)
    return CorrelationProfile(
        lags=lag_arr,
        c1=c1,
        c2=c2,
        c_max=c_max,
        peak_lag=int(lag_arr[k]),
        mu1_hat=float(mu1),
        mu2_hat=float(mu2),
        length=length,
    )


def analytic_noise_floor(config: ProtocolConfig, length: Optional[int] = None) -> float:
    """Honest-channel noise-floor variance for the configured system."""
    ch = derive_channel(config)
    return noise_floor_variance(
        ch.eta_total_honest,
        config.modulation_variance,
        ch.noise_var_honest,
        length or config.ranging_length,
    )


def empirical_noise_floor(profile: CorrelationProfile) -> float:
    """Noise-floor variance from the median squared correlation off the peak."""
    keep = profile.lags != profile.peak_lag
    sq = np.concatenate([profile.c1[keep] ** 2, profile.c2[keep] ** 2])
    if sq.size == 0:
        return math.nan
    return float(np.median(sq) / _CHI2_1_MEDIAN)


def detect_target(
    profile: CorrelationProfile,
    config: ProtocolConfig,
    noise_floor: str = "analytic",
) -> RangingVerdict:
    """Threshold the profile peak at ``k`` noise-floor standard deviations.

    ``noise_floor="analytic"`` uses the honest-channel formula for the
    configured system; ``"empirical"`` estimates it from off-peak lags. A
    zero threshold (no modulation) never reports a detection.
    """
    if noise_floor == "analytic":
        v_nf = analytic_noise_floor(config, profile.length)
    elif noise_floor == "empirical":
        v_nf = empirical_noise_floor(profile)
    else:
        raise ValueError(f"unknown noise_floor mode {noise_floor!r}")
    std = math.sqrt(v_nf) if v_nf >= 0 else math.nan
    threshold = config.correlation_threshold_sigma * std
    detected = bool(profile.c_max > 0.0 and profile.c_max >= threshold)
    c1, c2 = profile.at(profile.peak_lag)
    phase = estimate_phase(c1, c2) if (c1 != 0.0 or c2 != 0.0) else math.nan
    return RangingVerdict(
        detected=detected,
        estimated_delay=profile.peak_lag,
        threshold_used=float(threshold),
        phase_estimate=phase,
        noise_floor_std=float(std),
    )


def estimate_phase(c1_peak: float, c2_peak: float) -> float:
    """Four-quadrant phase drift from the signed peak correlations."""
    if c1_peak == 0.0 and c2_peak == 0.0:
        raise PhaseUndefinedError("both peak correlations are zero")
    return math.atan2(c2_peak, c1_peak)


def compensate_phase(frame: TransmitFrame, delta_hat: float) -> TransmitFrame:
    """Rotate (X, P) by ``delta_hat`` so the drifted echo reads as T1."""
    c, s = math.cos(delta_hat), math.sin(delta_hat)
    x, p = frame.x_quadrature, frame.p_quadrature
    return TransmitFrame(x * c - p * s, x * s + p * c, frame.basis_bits)


def aligned_segment(frame: TransmitFrame, receive: ReceiveFrame, delay: int):
    """(T1, R) over the frame samples that overlap the window at ``delay``.

    The overlap is truncated at the window end.
    """
    n = min(frame.frame_length, receive.measurements.shape[0] - delay)
    if n < 1 or delay < 0:
        raise InsufficientOverlapError(f"no overlap at delay {delay}")
    bits = frame.basis_bits[delay : delay + n].astype(bool)
    t1 = np.where(bits, frame.p_quadrature[:n], frame.x_quadrature[:n])
    return t1, receive.measurements[delay : delay + n]


def aligned_correlation(frame: TransmitFrame, receive: ReceiveFrame, delay: int):
    """(c1, c2) of the whole aligned record at ``delay``.

    Same statistic as the ranging profile but over every overlapping frame
    sample, which gives the phase estimate used for compensation.
    """
    t1, r = aligned_segment(frame, receive, delay)
    n = t1.shape[0]
    bits = frame.basis_bits[delay : delay + n].astype(bool)
    t2 = np.where(bits, frame.x_quadrature[:n], -frame.p_quadrature[:n])
    return float(np.dot(t1, r)) / n, float(np.dot(t2, r)) / n


def write_profile(path, profile: CorrelationProfile) -> int:
    """Write ``lag,c1,c2`` rows; returns the row count."""
    with open(path, "w") as fh:
        fh.write("lag,c1,c2\n")
        for d, a, b in zip(profile.lags.tolist(), profile.c1.tolist(), profile.c2.tolist()):
            fh.write(f"{d},{a!r},{b!r}\n")
    return len(profile.lags)


def read_profile(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return data["lag"].astype(np.int64), data["c1"], data["c2"]
