"""Domain types, parameter validation and random-stream handling.

All variances are in shot-noise units (SNU): the vacuum quadrature variance
is 1 and quadrature samples are stored in sqrt(SNU).
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ConfigError",
    "WindowOverflowError",
    "Scenario",
    "ProtocolConfig",
    "DerivedChannel",
    "TransmitFrame",
    "ReceiveFrame",
    "validate_config",
    "derive_channel",
    "make_stream",
    "spawn_streams",
    "trial_stream",
    "parse_config",
    "load_config",
    "format_config",
]


class ConfigError(ValueError):
    """Raised when a configuration violates one or more constraints.

    ``violations`` holds one human-readable message per violated constraint.
    """

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class WindowOverflowError(ValueError):
    pass


class Scenario(str, enum.Enum):
    HONEST = "honest"
    SPOOFED = "spoofed"


@dataclass(frozen=True)
class ProtocolConfig:
    """Physical and protocol parameters.

    Defaults follow the simulation settings used throughout the analysis:
    target reflectivity 0.1, unit detection efficiency, 0.05 SNU detector
    noise and 0.05 SNU excess noise, with the channel chosen so that the
    total honest transmission is 1e-4.
    """

    modulation_variance: float = 1000.0
    frame_length: int = 100_000
    receive_window_length: Optional[int] = None
    ranging_length: int = 2048
    channel_transmittance: float = math.sqrt(1e-3)
    target_reflectivity: float = 0.1
    detector_efficiency: float = 1.0
    detector_noise: float = 0.05
    excess_noise: float = 0.05
    spoofer_gain: float = 0.2
    phase_drift: float = 0.0
    true_delay: int = 1000
    correlation_threshold_sigma: float = 2.0
    excess_noise_threshold: float = 30.0
    rng_seed: int = 0

    @property
    def window_length(self) -> int:
        """Receive window M'; defaults to true_delay + M + a guard of M."""
        if self.receive_window_length is None:
            return int(self.true_delay) + 2 * int(self.frame_length)
        return int(self.receive_window_length)

    def replace(self, **changes) -> "ProtocolConfig":
        return dataclasses.replace(self, **changes)


_INT_FIELDS = {
    "frame_length",
    "receive_window_length",
    "ranging_length",
    "true_delay",
    "rng_seed",
}


def validate_config(config: ProtocolConfig) -> ProtocolConfig:
    """Return ``config`` unchanged if every constraint holds.

    Raises :class:`ConfigError` listing every violated constraint otherwise.
    """
    c = config
    errors = []

    for name in _INT_FIELDS:
        value = getattr(c, name)
        if name == "receive_window_length" and value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            errors.append(f"{name} must be an integer, got {value!r}")
    if errors:
        raise ConfigError(errors)

    for name in ("frame_length", "ranging_length"):
        if getattr(c, name) < 1:
            errors.append(f"{name} must be a positive integer")
    if c.window_length < 1:
        errors.append("receive_window_length must be a positive integer")
    if c.true_delay < 0:
        errors.append("true_delay must be non-negative")
    if not 0 <= c.rng_seed < 2**64:
        errors.append("rng_seed out of [0, 2**64)")

    for name in (
        "channel_transmittance",
        "target_reflectivity",
        "detector_efficiency",
    ):
        value = getattr(c, name)
        if not (math.isfinite(value) and 0.0 < value <= 1.0):
            errors.append(f"{name} out of (0,1]")

    for name in ("modulation_variance", "detector_noise", "excess_noise"):
        value = getattr(c, name)
        if not (math.isfinite(value) and value >= 0.0):
            errors.append(f"{name} must be a finite non-negative variance")

    for name in (
        "spoofer_gain",
        "correlation_threshold_sigma",
        "excess_noise_threshold",
    ):
        value = getattr(c, name)
        if not (math.isfinite(value) and value > 0.0):
            errors.append(f"{name} must be positive")

    if not math.isfinite(c.phase_drift):
        errors.append("phase_drift must be finite")

    if c.ranging_length > c.frame_length:
        errors.append("ranging_length exceeds frame_length")
    if c.frame_length >= c.window_length:
        errors.append("frame_length must be smaller than receive_window_length")
    if c.true_delay + c.frame_length > c.window_length:
        errors.append(
            "true_delay + frame_length exceeds receive_window_length"
        )

    if errors:
        raise ConfigError(errors)
    return config


@dataclass(frozen=True)
class DerivedChannel:
    eta_total_honest: float
    eta_total_spoof: float
    noise_var_honest: float
    noise_var_spoof: float
    spoof_excess: float

    def for_scenario(self, scenario: Scenario) -> tuple[float, float]:
        """(total transmission, total noise variance) seen by the receiver."""
        if Scenario(scenario) is Scenario.HONEST:
            return self.eta_total_honest, self.noise_var_honest
        return self.eta_total_spoof, self.noise_var_spoof


def derive_channel(config: ProtocolConfig) -> DerivedChannel:
    c = config
    eta_c2 = c.channel_transmittance**2
    eta_a = c.detector_efficiency * eta_c2 * c.target_reflectivity
    eta_p = c.spoofer_gain * eta_c2 * c.detector_efficiency / 2.0
    xi_1 = c.excess_noise + 2.0 / c.channel_transmittance
    return DerivedChannel(
        eta_total_honest=eta_a,
        eta_total_spoof=eta_p,
        noise_var_honest=eta_a * c.excess_noise + c.detector_noise + 1.0,
        noise_var_spoof=eta_p * xi_1 + c.detector_noise + 1.0,
        spoof_excess=xi_1,
    )


def make_stream(seed) -> np.random.Generator:
    """Counter-based generator for an integer seed or a ``SeedSequence``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def spawn_streams(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` statistically independent streams derived from one seed.

    Stream ``k`` depends only on ``(seed, k)``, never on ``n``.
    """
    return [trial_stream(seed, k) for k in range(n)]


def trial_stream(seed: int, index: int) -> np.random.Generator:
    # same child as SeedSequence(seed).spawn(n)[index]
    return make_stream(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _readonly(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TransmitFrame:
    x_quadrature: np.ndarray
    p_quadrature: np.ndarray
    basis_bits: np.ndarray

    def __post_init__(self):
        x = _readonly(self.x_quadrature, np.float64)
        p = _readonly(self.p_quadrature, np.float64)
        if x.shape != p.shape or x.ndim != 1:
            raise ValueError("quadrature sequences must be 1-D and equal length")
        object.__setattr__(self, "x_quadrature", x)
        object.__setattr__(self, "p_quadrature", p)
        object.__setattr__(self, "basis_bits", _readonly(self.basis_bits, np.uint8))

    @property
    def frame_length(self) -> int:
        return self.x_quadrature.shape[0]


@dataclass(frozen=True)
class ReceiveFrame:
    measurements: np.ndarray
    scenario: Scenario
    true_delay: int
    breakdown: Optional[object] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "measurements", _readonly(self.measurements, np.float64)
        )
        object.__setattr__(self, "scenario", Scenario(self.scenario))


# ---------------------------------------------------------------------------
# key = value config files

_FIELD_TYPES = {f.name: f for f in fields(ProtocolConfig)}


def _parse_value(name: str, text: str):
    if name in _INT_FIELDS:
        try:
            return int(text, 0)
        except ValueError:
            as_float = float(text)
            if not as_float.is_integer():
                raise ValueError(f"{name}: expected an integer, got {text!r}")
            return int(as_float)
    return float(text)


def parse_config(text: str, base: Optional[ProtocolConfig] = None) -> ProtocolConfig:
    """Parse ``key = value`` lines into a validated :class:`ProtocolConfig`.

    Blank lines and ``#`` comments are ignored. Unknown or repeated keys and
    malformed values are errors.
    """
    values = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in _FIELD_TYPES:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {exc}")
    if errors:
        raise ConfigError(errors)

    base = base or ProtocolConfig()
    return validate_config(dataclasses.replace(base, **values))


def load_config(path) -> ProtocolConfig:
    return parse_config(Path(path).read_text())


def format_config(config: ProtocolConfig) -> str:
    lines = []
    for f in fields(ProtocolConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {value!r}")
    return "\n".join(lines) + "\n"
