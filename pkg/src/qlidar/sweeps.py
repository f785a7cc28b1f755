"""Closed-form parameter sweeps and the figure recipes built on them.

Every sweep is a pure evaluation and returns plot-ready ``(x, y, series)``
rows; nothing is rendered here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analytics import config_for_snr, snr_db
from .core import ConfigError, ProtocolConfig, Scenario, derive_channel, validate_config
from .estimation import security_roc_analytic, target_roc_analytic
from .optics import snr_analytic

__all__ = [
    "VARIABLES",
    "FORMULAS",
    "SweepSpec",
    "SweepResult",
    "sweep",
    "default_grid",
    "write_table",
    "read_table",
    "FIGURES",
    "figure_table",
]

VARIABLES = (
    "gain",
    "transmittance",
    "eta_total",
    "snr",
    "phase_drift",
    "length_L",
    "pulses_M",
    "threshold",
)
FORMULAS = ("snr", "snr_ratio", "target_pd", "target_roc", "security_roc")
TABLE_HEADER = "x,y,series"

_DEFAULT_RANGES = {
    "gain": (0.01, 1.0),
    "transmittance": (0.001, 1.0),
    "eta_total": (1e-5, 1e-3),
    "snr": (-30.0, -5.0),
    "phase_drift": (0.0, 360.0),
    "length_L": (2.0**9, 2.0**11),
    "pulses_M": (5e5, 2e6),
    "threshold": (0.0, 6.0),
}


def default_grid(variable: str, points: int = 200) -> np.ndarray:
    lo, hi = _DEFAULT_RANGES[variable]
    return np.linspace(lo, hi, points)


@dataclass(frozen=True)
class SweepSpec:
    """One swept variable over a grid, with fixed overrides of the base config.

    ``snr`` is in dB and ``phase_drift`` in degrees; ``threshold`` is in
    noise-floor sigmas for target ROCs and in SNU (``xi_th``) for security
    ROCs. ``label`` names the emitted series.
    """

    variable: str
    grid: Sequence[float]
    fixed: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size == 0:
            raise ValueError("grid must be a non-empty 1-D sequence")
        d = np.diff(g)
        if g.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("grid must be strictly monotone")


@dataclass
class SweepResult:
    rows: list
    errors: list

    @property
    def x(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def y(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


def _apply(config: ProtocolConfig, variable: str, value: float) -> ProtocolConfig:
    if variable == "gain":
        return config.replace(spoofer_gain=value)
    if variable == "transmittance":
        return config.replace(channel_transmittance=value)
    if variable == "eta_total":
        if value <= 0:
            raise ConfigError(["eta_total must be positive"])
        ec = math.sqrt(value / (config.detector_efficiency * config.target_reflectivity))
        return config.replace(channel_transmittance=ec)
    if variable == "snr":
        return config_for_snr(value, config)
    if variable == "phase_drift":
        return config.replace(phase_drift=math.radians(value))
    if variable == "length_L":
        n = int(round(value))
        return config.replace(ranging_length=n, frame_length=max(n, config.frame_length))
    if variable == "pulses_M":
        n = int(round(value))
        return config.replace(frame_length=n, ranging_length=min(n, config.ranging_length))
    return config


def sweep(
    spec: SweepSpec,
    formula: str,
    base: ProtocolConfig | None = None,
) -> SweepResult:
    """Evaluate ``formula`` at every grid point.

    Points that leave the valid domain are recorded in ``errors`` as
    ``(x, message)`` and skipped; the sweep carries on.
    """
    if formula not in FORMULAS:
        raise ValueError(f"unknown formula {formula!r}")
    base = (base or ProtocolConfig()).replace(receive_window_length=None)
    if spec.fixed:
        base = base.replace(**spec.fixed)
    rows, errors = [], []
    label = spec.label

    if formula in ("target_roc", "security_roc"):
        if spec.variable != "threshold":
            raise ValueError("ROC sweeps run over the 'threshold' variable")
        try:
            cfg = validate_config(base)
        except ConfigError as exc:
            return SweepResult([], [(float("nan"), str(exc))])
        fn = target_roc_analytic if formula == "target_roc" else security_roc_analytic
        for th, (p_fa, p_d) in zip(spec.grid, fn(cfg, spec.grid)):
            rows.append((float(p_fa), float(p_d), label))
        return SweepResult(rows, errors)

    for value in spec.grid:
        value = float(value)
        try:
            cfg = validate_config(_apply(base, spec.variable, value))
        except (ConfigError, ValueError) as exc:
            errors.append((value, str(exc)))
            continue
        if formula == "snr":
            y = snr_db(snr_analytic(cfg))
        elif formula == "snr_ratio":
            y = snr_analytic(cfg, Scenario.SPOOFED) / snr_analytic(cfg, Scenario.HONEST)
        else:  # target_pd
            k = cfg.correlation_threshold_sigma
            y = float(target_roc_analytic(cfg, [k])[0, 1])
        rows.append((value, float(y), label))
    return SweepResult(rows, errors)


def write_table(path, rows) -> int:
    with open(path, "w") as fh:
        fh.write(TABLE_HEADER + "\n")
        for x, y, series in rows:
            fh.write(f"{float(x)!r},{float(y)!r},{series}\n")
    return len(rows)


def read_table(path):
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TABLE_HEADER:
            raise ValueError(f"unexpected table header {header!r}")
        for line in fh:
            x, y, series = line.rstrip("\n").split(",", 2)
            out.append((float(x), float(y), series))
    return out


# ---------------------------------------------------------------------------
# figure recipes

PAPER_BASE = ProtocolConfig(
    target_reflectivity=0.1,
    detector_efficiency=1.0,
    detector_noise=0.05,
    excess_noise=0.05,
)
_L_SERIES = (2**9, 2**10, 2**11)


def _eta_config(eta: float, base: ProtocolConfig = PAPER_BASE) -> ProtocolConfig:
    return _apply(base, "eta_total", eta)


def _security_grid(cfg: ProtocolConfig, points: int = 200) -> np.ndarray:
    """xi_th grid spanning honest false-alarm rates from ~0.84 to ~1e-9."""
    ch = derive_channel(cfg)
    sd = math.sqrt(2.0) * ch.noise_var_honest / math.sqrt(cfg.frame_length)
    xi0 = cfg.excess_noise
    return np.linspace(xi0 - sd / ch.eta_total_honest, xi0 + 6.0 * sd / ch.eta_total_honest, points)


def _security_series(items):
    rows = []
    for label, cfg in items:
        spec = SweepSpec("threshold", _security_grid(cfg), label=label)
        rows += sweep(spec, "security_roc", cfg).rows
    return rows


def _fig2():
    rows = []
    for vm in (100.0, 500.0, 1000.0):
        spec = SweepSpec("eta_total", default_grid("eta_total"), label=f"V_M={vm:g}")
        rows += sweep(spec, "snr", PAPER_BASE.replace(modulation_variance=vm)).rows
    return rows


def _fig3():
    rows = []
    for ec in (0.1, 0.05, 0.01):
        spec = SweepSpec(
            "gain", default_grid("gain"), {"channel_transmittance": ec}, f"eta_c={ec:g}"
        )
        rows += sweep(spec, "snr_ratio", PAPER_BASE).rows
    return rows


def _fig4():
    rows = []
    for n in _L_SERIES:
        spec = SweepSpec("snr", default_grid("snr"), {"ranging_length": n, "frame_length": n}, f"L={n}")
        rows += sweep(spec, "target_pd", PAPER_BASE).rows
    return rows


def _fig5():
    rows = []
    base = config_for_snr(-15.0, PAPER_BASE)
    grid = np.arange(0.0, 361.0, 1.0)
    for n in _L_SERIES:
        spec = SweepSpec("phase_drift", grid, {"ranging_length": n, "frame_length": n}, f"L={n}")
        rows += sweep(spec, "target_pd", base).rows
    return rows


def _fig6():
    rows = []
    base = config_for_snr(-15.0, PAPER_BASE).replace(phase_drift=0.0)
    for n in _L_SERIES:
        spec = SweepSpec(
            "threshold", default_grid("threshold"), {"ranging_length": n, "frame_length": n}, f"L={n}"
        )
        rows += sweep(spec, "target_roc", base).rows
    return rows


def _fig7():
    items = []
    for eta in (1e-5, 5e-5, 1e-4):
        cfg = _eta_config(eta).replace(frame_length=10**6, spoofer_gain=0.2)
        items.append((f"eta={eta:g}", cfg))
    return _security_series(items)


def _fig8():
    base = _eta_config(1e-4).replace(frame_length=10**6)
    return _security_series(
        [(f"gamma={g:g}", base.replace(spoofer_gain=g)) for g in (0.1, 0.2, 0.3)]
    )


def _fig9():
    base = _eta_config(1e-4)
    items = []
    for g in (0.1, 0.2):
        for m in (10**6, 2 * 10**6):
            items.append((f"gamma={g:g};M={m:g}", base.replace(spoofer_gain=g, frame_length=m)))
    return _security_series(items)


FIGURES: dict[str, Callable[[], list]] = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
}


def figure_table(name: str) -> list:
    """Rows ``(x, y, series)`` reproducing the named figure's data."""
    try:
        return FIGURES[name]()
    except KeyError:
        raise ValueError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}") from None
