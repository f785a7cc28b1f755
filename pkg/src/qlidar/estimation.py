"""Finite-size parameter estimation and the spoofing decision."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analytics import invert_threshold, noise_floor_variance, peak_variance, tail_probability
from .core import ProtocolConfig, derive_channel

__all__ = [
    "DegenerateRegressorError",
    "NoiseEstimate",
    "SecurityVerdict",
    "estimate_parameters",
    "security_decide",
    "security_roc_analytic",
    "target_roc_analytic",
    "xi_threshold_for_pfa",
    "write_roc",
    "read_roc",
]


class DegenerateRegressorError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseEstimate:
    sqrt_eta_hat: float
    vn_hat: float
    v_eps_hat: float
    var_sqrt_eta: float
    var_v_eps: float
    sample_count: int


@dataclass(frozen=True)
class SecurityVerdict:
    spoof_detected: bool
    v_eps_threshold: float
    p_value_context: float


def estimate_parameters(t1, r, config: ProtocolConfig) -> NoiseEstimate:
    """Regression of the aligned, phase-compensated record on T1.

    The transmittance amplitude is the least-squares slope through the
    origin and the noise variance is the mean squared residual. Sampling
    variances are plug-in values: the peak-correlation variance (direction
    cosine 1) over V_M^2 for the slope, ``2 V_N^2 / M`` for the noise.
    """
    t1 = np.asarray(t1, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if t1.shape != r.shape or t1.ndim != 1:
        raise ValueError("t1 and r must be 1-D and of equal length")
    m = t1.shape[0]
    energy = float(np.dot(t1, t1))
    if not energy > 0.0:
        raise DegenerateRegressorError("sum of T1^2 is zero")

    slope = float(np.dot(t1, r)) / energy
    resid = r - slope * t1
    vn = float(np.dot(resid, resid)) / m
    vm = config.modulation_variance
    if vm > 0:
        var_slope = peak_variance(slope**2, vm, vn, m, 1.0) / vm**2
    else:
        var_slope = math.nan
    return NoiseEstimate(
        sqrt_eta_hat=slope,
        vn_hat=vn,
        v_eps_hat=vn - (1.0 + config.detector_noise),
        var_sqrt_eta=float(var_slope),
        var_v_eps=2.0 * vn**2 / m,
        sample_count=m,
    )


def security_decide(estimate: NoiseEstimate, config: ProtocolConfig) -> SecurityVerdict:
    """Alarm when the estimated excess noise strictly exceeds ``eta_hat * xi_th``.

    ``p_value_context`` is the honest-channel false-alarm probability at that
    threshold, evaluated with the estimated transmittance.
    """
    eta_hat = estimate.sqrt_eta_hat**2
    threshold = eta_hat * config.excess_noise_threshold
    honest_mean = eta_hat * config.excess_noise
    honest_vn = honest_mean + config.detector_noise + 1.0
    p_fa = float(
        tail_probability(threshold, honest_mean, 2.0 * honest_vn**2 / estimate.sample_count)
    )
    return SecurityVerdict(
        spoof_detected=bool(estimate.v_eps_hat > threshold),
        v_eps_threshold=threshold,
        p_value_context=p_fa,
    )


def _security_moments(config: ProtocolConfig, sample_count: Optional[int]):
    ch = derive_channel(config)
    m = sample_count or config.frame_length
    honest = (ch.eta_total_honest, ch.eta_total_honest * config.excess_noise,
              2.0 * ch.noise_var_honest**2 / m)
    spoof = (ch.eta_total_spoof, ch.eta_total_spoof * ch.spoof_excess,
             2.0 * ch.noise_var_spoof**2 / m)
    return honest, spoof


def security_roc_analytic(
    config: ProtocolConfig,
    threshold_grid: Sequence[float],
    sample_count: Optional[int] = None,
):
    """(P_fa, P_d) of the excess-noise check for each ``xi_th`` in the grid.

    The grid holds excess-noise thresholds referred to the transmitter (SNU);
    each scenario compares its excess-noise estimate against its own
    ``eta * xi_th``, as the receiver does with its transmittance estimate.
    Both coordinates use the Gaussian approximation with variance ``2 V_N^2 / M``.
    """
    xi = np.asarray(threshold_grid, dtype=np.float64)
    (eta_a, mean_a, var_a), (eta_p, mean_p, var_p) = _security_moments(config, sample_count)
    p_fa = tail_probability(eta_a * xi, mean_a, var_a)
    p_d = tail_probability(eta_p * xi, mean_p, var_p)
    return np.column_stack([p_fa, p_d])


def xi_threshold_for_pfa(
    config: ProtocolConfig, p_fa: float, sample_count: Optional[int] = None
) -> float:
    """Excess-noise threshold giving the requested honest false-alarm rate."""
    (eta_a, mean_a, var_a), _ = _security_moments(config, sample_count)
    return invert_threshold(p_fa, mean_a, var_a) / eta_a


def target_roc_analytic(
    config: ProtocolConfig,
    threshold_grid: Sequence[float],
    length: Optional[int] = None,
):
    """(P_fa, P_d) of target detection for thresholds in noise-floor sigmas.

    ``C_th = k * sqrt(V_nf)`` for each ``k`` in the grid; the peak mean is
    ``sqrt(eta) V_M max(|cos d|, |sin d|)`` with the matching peak variance.
    """
    k = np.asarray(threshold_grid, dtype=np.float64)
    ch = derive_channel(config)
    eta, vn = ch.eta_total_honest, ch.noise_var_honest
    vm = config.modulation_variance
    n = length or config.ranging_length
    mu = max(abs(math.cos(config.phase_drift)), abs(math.sin(config.phase_drift)))
    v_nf = noise_floor_variance(eta, vm, vn, n)
    v_p = peak_variance(eta, vm, vn, n, mu)
    c_th = k * math.sqrt(v_nf)
    c_max = math.sqrt(eta) * vm * mu
    p_fa = tail_probability(c_th, 0.0, v_nf)
    p_d = tail_probability(c_th, c_max, v_p)
    return np.column_stack([p_fa, p_d])


ROC_HEADER = "threshold,p_fa,p_d,scenario,source"


def write_roc(path, rows) -> int:
    """Write ROC rows ``(threshold, p_fa, p_d, scenario, source)``."""
    n = 0
    with open(path, "w") as fh:
        fh.write(ROC_HEADER + "\n")
        for th, pfa, pd, scenario, source in rows:
            fh.write(f"{float(th)!r},{float(pfa)!r},{float(pd)!r},{scenario},{source}\n")
            n += 1
    return n


def read_roc(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ROC_HEADER:
            raise ValueError(f"unexpected ROC header {header!r}")
        for line in fh:
            th, pfa, pd, scenario, source = line.rstrip("\n").split(",")
            rows.append((float(th), float(pfa), float(pd), scenario, source))
    return rows
