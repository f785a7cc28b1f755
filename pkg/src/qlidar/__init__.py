"""Simulation and detection analytics for coherent-state LiDAR.

Gaussian-modulated coherent states are used both to range a target by
cross-correlation and to detect intercept-resend spoofing from the excess
noise it adds.
"""
from .analytics import config_for_snr, erfc, invert_threshold, noise_floor_variance, peak_variance
from .core import (
    ConfigError,
    DerivedChannel,
    ProtocolConfig,
    ReceiveFrame,
    Scenario,
    TransmitFrame,
    derive_channel,
    load_config,
    make_stream,
    parse_config,
    spawn_streams,
    trial_stream,
    validate_config,
)
from .estimation import (
    NoiseEstimate,
    SecurityVerdict,
    estimate_parameters,
    security_decide,
    security_roc_analytic,
    target_roc_analytic,
    xi_threshold_for_pfa,
)
from .harness import EnsembleReport, ScenarioResult, emit_results, run_ensemble, run_scenario
from .kernels import BACKEND
from .optics import ChannelMode, honest_roundtrip, modulate, snr_analytic, spoof_roundtrip
from .ranging import (
    build_sequences,
    compensate_phase,
    detect_target,
    estimate_phase,
    moving_cross_correlation,
)
from .sweeps import SweepSpec, figure_table, sweep

__version__ = "0.1.0"
