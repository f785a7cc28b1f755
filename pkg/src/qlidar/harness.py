"""End-to-end scenario runs, Monte Carlo ensembles and result files."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    ProtocolConfig,
    Scenario,
    derive_channel,
    format_config,
    trial_stream,
    validate_config,
)
from .estimation import (
    NoiseEstimate,
    SecurityVerdict,
    estimate_parameters,
    security_decide,
    security_roc_analytic,
    write_roc,
    xi_threshold_for_pfa,
)
from .optics import ChannelMode, honest_roundtrip, modulate, spoof_roundtrip
from .ranging import (
    CorrelationProfile,
    RangingVerdict,
    aligned_correlation,
    aligned_segment,
    compensate_phase,
    detect_target,
    estimate_phase,
    moving_cross_correlation,
    write_profile,
)
from .sweeps import SweepResult, write_table

__all__ = [
    "StepError",
    "ProfileSummary",
    "GroundTruthScore",
    "ScenarioResult",
    "EnsembleReport",
    "run_scenario",
    "run_ensemble",
    "empirical_security_roc",
    "emit_results",
    "binomial_halfwidth",
]

Z_95 = 1.96


class StepError(RuntimeError):
    """A pipeline step failed; ``step`` names it and ``__cause__`` holds the error."""

    def __init__(self, step: str, exc: BaseException):
        self.step = step
        super().__init__(f"{step}: {exc}")


@dataclass(frozen=True)
class ProfileSummary:
    peak_lag: int
    c_max: float
    noise_floor_std: float


@dataclass(frozen=True)
class GroundTruthScore:
    """Scoring of one run against the simulated truth (never seen by the receiver).

    ``aligned_statistic`` is the correlation at the true lag of the sequence
    whose direction cosine dominates, signed so its mean is positive.
    ``false_alarm_hits``/``false_alarm_evals`` count one-sided threshold
    crossings of c1 and c2 over misaligned lags whose window lies inside
    the signal span.
    """

    aligned_statistic: float
    peak_hit: bool
    false_alarm_hits: int
    false_alarm_evals: int
    profile_false_alarm: bool
    delay_correct: bool


@dataclass(frozen=True)
class ScenarioResult:
    verdict_ranging: RangingVerdict
    verdict_security: Optional[SecurityVerdict]
    estimate: Optional[NoiseEstimate]
    profile_summary: ProfileSummary
    seed: int
    scenario: Scenario
    score: GroundTruthScore
    trial: int = 0
    compensation_phase: float = math.nan
    artifacts: Optional[dict] = field(default=None, compare=False, repr=False)


@dataclass
class EnsembleReport:
    config: ProtocolConfig
    scenario: Scenario
    trials: int
    empirical_p_d: float
    p_d_halfwidth: float
    empirical_p_fa: float
    p_fa_halfwidth: float
    p_fa_evaluations: int
    profile_p_fa: float
    profile_p_fa_halfwidth: float
    detection_rate: float
    detection_halfwidth: float
    delay_accuracy: float
    delay_halfwidth: float
    spoof_alarm_rate: float
    spoof_alarm_halfwidth: float
    v_eps_mean: float
    v_eps_std: float
    v_eps_count: int
    results: list = field(repr=False, default_factory=list)

    @property
    def v_eps_values(self) -> np.ndarray:
        return np.array(
            [r.estimate.v_eps_hat for r in self.results if r.estimate is not None]
        )


def binomial_halfwidth(p: float, n: int, z: float = Z_95) -> float:
    if n <= 0 or not math.isfinite(p):
        return math.nan
    return z * math.sqrt(p * (1.0 - p) / n)


def _score(config, profile: CorrelationProfile, verdict: RangingVerdict) -> GroundTruthScore:
    td, m, n = config.true_delay, config.frame_length, profile.length
    th = verdict.threshold_used
    lags = profile.lags
    full = len(lags) > 0 and lags[0] == 0 and lags[-1] == len(lags) - 1

    delta = config.phase_drift
    cos_d, sin_d = math.cos(delta), math.sin(delta)
    if abs(cos_d) >= abs(sin_d):
        stat = math.copysign(1.0, cos_d) * profile.at(td)[0]
    else:
        stat = math.copysign(1.0, sin_d) * profile.at(td)[1]
    peak_hit = bool(stat > 0.0 and stat >= th)

    hits = evals = 0
    profile_fa = False
    if full:
        inner = np.arange(td, min(td + m - n, lags[-1]) + 1)
        inner = inner[inner != td]
        hits = int(np.count_nonzero(profile.c1[inner] >= th)) + int(
            np.count_nonzero(profile.c2[inner] >= th)
        )
        evals = 2 * inner.size
        mag = np.maximum(np.abs(profile.c1), np.abs(profile.c2))
        off = np.ones(len(lags), dtype=bool)
        off[td] = False
        profile_fa = bool(np.any(mag[off] >= th)) if th > 0 else False
    return GroundTruthScore(
        aligned_statistic=float(stat),
        peak_hit=peak_hit,
        false_alarm_hits=hits,
        false_alarm_evals=evals,
        profile_false_alarm=profile_fa,
        delay_correct=bool(verdict.detected and verdict.estimated_delay == td),
    )


def run_scenario(
    config: ProtocolConfig,
    scenario: Scenario = Scenario.HONEST,
    stream: Optional[np.random.Generator] = None,
    *,
    trial: int = 0,
    verbose: bool = False,
    channel_mode: ChannelMode = ChannelMode.TERM_BY_TERM,
    noise_floor: str = "analytic",
    method: str = "auto",
) -> ScenarioResult:
    """Run the protocol once: modulate, round trip, range, compensate, estimate, decide.

    Ranging locates the delay from the first L samples; the compensation
    phase is then taken from the correlations of the whole aligned record.

    Without an explicit stream the run uses trial stream ``trial`` of
    ``config.rng_seed``, so it matches the same trial of an ensemble. The
    receiver steps are identical for both scenarios; only the channel
    differs. With ``verbose`` every intermediate object is kept in
    ``artifacts``.
    """
    scenario = Scenario(scenario)
    try:
        validate_config(config)
    except ValueError as exc:
        raise StepError("validate", exc) from exc
    if stream is None:
        stream = trial_stream(config.rng_seed, trial)

    def step(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise StepError(name, exc) from exc

    frame = step("modulate", modulate, config, stream)
    channel = honest_roundtrip if scenario is Scenario.HONEST else spoof_roundtrip
    receive = step("channel", channel, frame, config, stream, channel_mode)
    profile = step(
        "ranging", moving_cross_correlation, frame, receive, config.ranging_length, method
    )
    verdict = step("detect", detect_target, profile, config, noise_floor)

    estimate = security = None
    compensated = None
    phase = math.nan
    if verdict.detected:
        # the ranging peak only sees L samples; the full aligned record
        # gives a much tighter phase for compensation
        c1, c2 = step("align", aligned_correlation, frame, receive, verdict.estimated_delay)
        phase = step("compensate", estimate_phase, c1, c2)
        compensated = step("compensate", compensate_phase, frame, phase)
        t1, r = step("align", aligned_segment, compensated, receive, verdict.estimated_delay)
        estimate = step("estimate", estimate_parameters, t1, r, config)
        security = step("security", security_decide, estimate, config)

    artifacts = None
    if verbose:
        artifacts = {
            "frame": frame,
            "receive": receive,
            "profile": profile,
            "compensated_frame": compensated,
        }
    return ScenarioResult(
        verdict_ranging=verdict,
        verdict_security=security,
        estimate=estimate,
        profile_summary=ProfileSummary(profile.peak_lag, profile.c_max, verdict.noise_floor_std),
        seed=int(config.rng_seed),
        scenario=scenario,
        score=_score(config, profile, verdict),
        trial=int(trial),
        compensation_phase=float(phase),
        artifacts=artifacts,
    )


def _run_chunk(args):
    config, scenario, indices, kwargs = args
    return [run_scenario(config, scenario, trial=k, **kwargs) for k in indices]


def run_ensemble(
    config: ProtocolConfig,
    scenario: Scenario,
    trials: int,
    parallel: Optional[int] = None,
    **kwargs,
) -> EnsembleReport:
    """Run ``trials`` independent seeded trials and aggregate detection rates.

    Trial ``k`` always draws from stream ``k`` of ``config.rng_seed``, so the
    report does not depend on ``parallel``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    scenario = Scenario(scenario)
    validate_config(config)
    kwargs.pop("verbose", None)
    workers = parallel if parallel is not None else (os.cpu_count() or 1)
    workers = max(1, min(int(workers), trials))

    if workers == 1:
        results = _run_chunk((config, scenario, range(trials), kwargs))
    else:
        chunks = [list(range(trials))[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(config, scenario, c, kwargs) for c in chunks])
            results = sorted((r for part in parts for r in part), key=lambda r: r.trial)
    return _aggregate(config, scenario, results)


def _rate(flags):
    n = len(flags)
    p = float(np.mean(flags)) if n else math.nan
    return p, binomial_halfwidth(p, n)


def _aggregate(config, scenario, results) -> EnsembleReport:
    n = len(results)
    p_d, p_d_hw = _rate([r.score.peak_hit for r in results])
    hits = sum(r.score.false_alarm_hits for r in results)
    evals = sum(r.score.false_alarm_evals for r in results)
    p_fa = hits / evals if evals else math.nan
    prof, prof_hw = _rate([r.score.profile_false_alarm for r in results])
    det, det_hw = _rate([r.verdict_ranging.detected for r in results])
    acc, acc_hw = _rate([r.score.delay_correct for r in results])
    alarm, alarm_hw = _rate(
        [bool(r.verdict_security and r.verdict_security.spoof_detected) for r in results]
    )
    v = np.array([r.estimate.v_eps_hat for r in results if r.estimate is not None])
    return EnsembleReport(
        config=config,
        scenario=scenario,
        trials=n,
        empirical_p_d=p_d,
        p_d_halfwidth=p_d_hw,
        empirical_p_fa=p_fa,
        p_fa_halfwidth=binomial_halfwidth(p_fa, evals),
        p_fa_evaluations=evals,
        profile_p_fa=prof,
        profile_p_fa_halfwidth=prof_hw,
        detection_rate=det,
        detection_halfwidth=det_hw,
        delay_accuracy=acc,
        delay_halfwidth=acc_hw,
        spoof_alarm_rate=alarm,
        spoof_alarm_halfwidth=alarm_hw,
        v_eps_mean=float(v.mean()) if v.size else math.nan,
        v_eps_std=float(v.std(ddof=1)) if v.size > 1 else math.nan,
        v_eps_count=int(v.size),
        results=list(results),
    )


def _alarm_rate(report: EnsembleReport, xi_th: float) -> float:
    """Fraction of trials whose excess-noise estimate exceeds ``eta_hat * xi_th``.

    Trials without a ranging detection carry no estimate and count as no alarm.
    """
    alarms = 0
    for r in report.results:
        est = r.estimate
        if est is not None and est.v_eps_hat > est.sqrt_eta_hat**2 * xi_th:
            alarms += 1
    return alarms / report.trials


def empirical_security_roc(honest: EnsembleReport, spoofed: EnsembleReport, xi_grid):
    """Empirical (P_fa, P_d) pairs over excess-noise thresholds."""
    return np.array([[_alarm_rate(honest, xi), _alarm_rate(spoofed, xi)] for xi in xi_grid])


DEFAULT_ROC_PFA = (0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001)


def roc_rows(reports: Sequence[EnsembleReport], p_fa_targets=DEFAULT_ROC_PFA):
    """Analytic and empirical ROC rows for one or two ensembles of a config."""
    config = reports[0].config
    grid = [xi_threshold_for_pfa(config, p) for p in p_fa_targets]
    rows = [
        (xi, pfa, pd, "honest+spoofed", "analytic")
        for xi, (pfa, pd) in zip(grid, security_roc_analytic(config, grid))
    ]
    by = {r.scenario: r for r in reports}
    h, s = by.get(Scenario.HONEST), by.get(Scenario.SPOOFED)
    label = "+".join(sc.value for sc in (Scenario.HONEST, Scenario.SPOOFED) if sc in by)
    for xi in grid:
        pfa = _alarm_rate(h, xi) if h else math.nan
        pd = _alarm_rate(s, xi) if s else math.nan
        rows.append((xi, pfa, pd, label, "montecarlo"))
    return rows


# ---------------------------------------------------------------------------
# persistence

RESULT_COLUMNS = (
    "trial",
    "scenario",
    "seed",
    "detected",
    "estimated_delay",
    "c_max",
    "threshold",
    "noise_floor_std",
    "phase_estimate",
    "compensation_phase",
    "sqrt_eta_hat",
    "vn_hat",
    "v_eps_hat",
    "v_eps_threshold",
    "spoof_detected",
    "peak_hit",
    "fa_hits",
    "fa_evals",
)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _result_row(r: ScenarioResult):
    est, sec, rv = r.estimate, r.verdict_security, r.verdict_ranging
    nan = math.nan
    return (
        r.trial,
        r.scenario.value,
        r.seed,
        rv.detected,
        rv.estimated_delay,
        r.profile_summary.c_max,
        rv.threshold_used,
        rv.noise_floor_std,
        rv.phase_estimate,
        r.compensation_phase,
        est.sqrt_eta_hat if est else nan,
        est.vn_hat if est else nan,
        est.v_eps_hat if est else nan,
        sec.v_eps_threshold if sec else nan,
        sec.spoof_detected if sec else False,
        r.score.peak_hit,
        r.score.false_alarm_hits,
        r.score.false_alarm_evals,
    )


def _write_results(path, results) -> int:
    with open(path, "w") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for r in results:
            fh.write(",".join(_fmt(v) for v in _result_row(r)) + "\n")
    return len(results)


def _report_summary(rep: EnsembleReport) -> list[str]:
    s = rep.scenario.value
    keys = (
        "trials",
        "empirical_p_d",
        "p_d_halfwidth",
        "empirical_p_fa",
        "p_fa_halfwidth",
        "p_fa_evaluations",
        "profile_p_fa",
        "profile_p_fa_halfwidth",
        "detection_rate",
        "detection_halfwidth",
        "delay_accuracy",
        "delay_halfwidth",
        "spoof_alarm_rate",
        "spoof_alarm_halfwidth",
        "v_eps_mean",
        "v_eps_std",
        "v_eps_count",
    )
    return [f"{s}.{k} = {_fmt(getattr(rep, k))}" for k in keys]


def _write_lines(path, lines) -> int:
    Path(path).write_text("\n".join(lines) + "\n")
    return len(lines)


def emit_results(obj, destination, name: str = "table") -> dict:
    """Persist a result, ensemble report(s) or sweep table under ``destination``.

    * ``ScenarioResult`` -> results.csv, summary.txt and, when the run kept
      its profile, profile.csv
    * ``EnsembleReport`` or a list of them -> results.csv, roc.csv, summary.txt
    * ``SweepResult`` or a list of ``(x, y, series)`` rows -> ``<name>.csv``

    A manifest.txt listing every written file with its data-row count is
    written last. Returns ``{filename: rows}``.
    """
    out = Path(destination)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    files: dict[str, int] = {}

    def put(fname, writer, *args):
        path = out / fname
        try:
            files[fname] = writer(path, *args)
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc

    if isinstance(obj, ScenarioResult):
        put("results.csv", _write_results, [obj])
        if obj.artifacts and obj.artifacts.get("profile") is not None:
            put("profile.csv", write_profile, obj.artifacts["profile"])
        put("summary.txt", _write_lines, _result_summary(obj))
    elif isinstance(obj, EnsembleReport) or (
        isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], EnsembleReport)
    ):
        reports = [obj] if isinstance(obj, EnsembleReport) else list(obj)
        put("results.csv", _write_results, [r for rep in reports for r in rep.results])
        put("roc.csv", write_roc, roc_rows(reports))
        lines = format_config(reports[0].config).splitlines()
        for rep in reports:
            lines += _report_summary(rep)
        put("summary.txt", _write_lines, lines)
    else:
        rows = obj.rows if isinstance(obj, SweepResult) else list(obj)
        put(f"{name}.csv", write_table, rows)
        if isinstance(obj, SweepResult) and obj.errors:
            put(f"{name}_errors.txt", _write_lines, [f"{x!r}: {m}" for x, m in obj.errors])

    manifest = ["file,rows"] + [f"{f},{n}" for f, n in files.items()]
    put("manifest.txt", _write_lines, manifest)
    files.pop("manifest.txt")
    return files


def _result_summary(r: ScenarioResult) -> list[str]:
    rv = r.verdict_ranging
    lines = [
        f"scenario = {r.scenario.value}",
        f"seed = {r.seed}",
        f"trial = {r.trial}",
        f"detected = {_fmt(rv.detected)}",
        f"estimated_delay = {rv.estimated_delay}",
        f"c_max = {_fmt(r.profile_summary.c_max)}",
        f"threshold = {_fmt(rv.threshold_used)}",
        f"noise_floor_std = {_fmt(rv.noise_floor_std)}",
        f"phase_estimate = {_fmt(rv.phase_estimate)}",
        f"compensation_phase = {_fmt(r.compensation_phase)}",
    ]
    if r.estimate is not None:
        e, s = r.estimate, r.verdict_security
        lines += [
            f"sqrt_eta_hat = {_fmt(e.sqrt_eta_hat)}",
            f"var_sqrt_eta = {_fmt(e.var_sqrt_eta)}",
            f"vn_hat = {_fmt(e.vn_hat)}",
            f"v_eps_hat = {_fmt(e.v_eps_hat)}",
            f"var_v_eps = {_fmt(e.var_v_eps)}",
            f"sample_count = {e.sample_count}",
            f"v_eps_threshold = {_fmt(s.v_eps_threshold)}",
            f"spoof_detected = {_fmt(s.spoof_detected)}",
            f"p_fa_at_threshold = {_fmt(s.p_value_context)}",
        ]
    return lines
