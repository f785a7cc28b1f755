"""Closed-form detection statistics shared by ranging and estimation."""
from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special

from .core import ProtocolConfig, Scenario, derive_channel

__all__ = [
    "erfc",
    "tail_probability",
    "invert_threshold",
    "noise_floor_variance",
    "peak_variance",
    "config_for_snr",
    "snr_db",
]


def erfc(x):
    """Complementary error function, ``2/sqrt(pi) * int_x^inf exp(-z^2) dz``.

    Scalars in, float out; arrays in, arrays out.
    """
    out = special.erfc(x)
    if np.ndim(out) == 0:
        return float(out)
    return out


def tail_probability(threshold, mean, variance):
    """P(Y >= threshold) for Y ~ N(mean, variance)."""
    z = (np.asarray(threshold, dtype=float) - mean) / np.sqrt(2.0 * variance)
    return erfc(z) / 2.0


def invert_threshold(p_fa_target: float, mean: float, variance: float) -> float:
    """Threshold ``th`` with ``tail_probability(th, mean, variance) == p_fa_target``.

    Solved by bracketed root finding on the standardized threshold, which is
    strictly decreasing in probability.
    """
    if not 0.0 < p_fa_target < 1.0:
        raise ValueError(f"p_fa_target {p_fa_target!r} outside (0, 1)")
    if not variance > 0.0:
        raise ValueError("variance must be positive")

    # work with log-probabilities so targets down to ~1e-300 stay well scaled
    log_target = math.log(p_fa_target)

    def f(z):
        return math.log(special.erfc(z) / 2.0) - log_target

    lo, hi = -8.0, 8.0
    while f(lo) < 0.0:
        lo *= 2.0
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 64.0:
            raise ValueError(f"p_fa_target {p_fa_target!r} is not attainable")
    z = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return mean + z * math.sqrt(2.0 * variance)


def noise_floor_variance(eta, modulation_variance, noise_variance, length):
    """Variance of the cross-correlation estimator at a misaligned lag.

    ``V_M (eta V_M + V_N) / L`` -- identical to ``(eta V_M^2 / L)(1 + 1/SNR)``
    but finite when ``eta`` is zero.
    """
    vm = modulation_variance
    return vm * (eta * vm + noise_variance) / length


def peak_variance(eta, modulation_variance, noise_variance, length, mu):
    """Variance of the estimator at the aligned lag for direction cosine ``mu``."""
    vm = modulation_variance
    floor = noise_floor_variance(eta, vm, noise_variance, length)
    return eta * vm**2 * np.square(mu) / length + floor


def snr_db(snr: float) -> float:
    return 10.0 * math.log10(snr)


def config_for_snr(
    snr_db_value: float,
    base: ProtocolConfig | None = None,
    scenario: Scenario = Scenario.HONEST,
) -> ProtocolConfig:
    """Copy of ``base`` whose channel transmittance yields the requested SNR.

    Only ``channel_transmittance`` changes. For the honest channel the total
    transmission solves ``eta V_M = SNR (eta xi_0 + V_d + 1)`` exactly.
    """
    base = base or ProtocolConfig()
    snr = 10.0 ** (snr_db_value / 10.0)
    vm = base.modulation_variance
    if Scenario(scenario) is Scenario.HONEST:
        denom = vm - snr * base.excess_noise
        if denom <= 0:
            raise ValueError("requested SNR is not reachable with this modulation")
        eta = snr * (base.detector_noise + 1.0) / denom
        eta_c = math.sqrt(eta / (base.detector_efficiency * base.target_reflectivity))
    else:
        def excess(ec):
            ch = derive_channel(base.replace(channel_transmittance=ec))
            return ch.eta_total_spoof * vm / ch.noise_var_spoof - snr

        eta_c = optimize.brentq(excess, 1e-12, 1.0, xtol=1e-15)
    if not 0.0 < eta_c <= 1.0:
        raise ValueError("requested SNR needs channel transmittance outside (0, 1]")
    return base.replace(channel_transmittance=eta_c)
