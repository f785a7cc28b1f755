"""Command-line entry point.

Verbs: validate, run, ensemble, sweep, fig2 .. fig9.
Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .core import ConfigError, ProtocolConfig, Scenario, load_config, validate_config
from .harness import StepError, emit_results, run_ensemble, run_scenario
from .sweeps import FIGURES, FORMULAS, VARIABLES, SweepSpec, default_grid, figure_table, sweep

log = logging.getLogger("qlidar")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _common(p: argparse.ArgumentParser, scenario=True):
    p.add_argument("--config", help="key = value config file (defaults if omitted)")
    p.add_argument("--seed", type=int, default=None, help="override rng_seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--verbose", action="store_true")
    if scenario:
        p.add_argument("--scenario", choices=["honest", "spoofed", "both"], default="honest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlidar",
        description="Coherent-state LiDAR ranging and spoofing-detection simulator",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("run", help="run the protocol once")
    _common(p)
    p.add_argument("--noise-floor", choices=["analytic", "empirical"], default="analytic")

    p = sub.add_parser("ensemble", help="Monte Carlo ensemble of seeded trials")
    _common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--parallel", type=int, default=os.cpu_count() or 1)
    p.add_argument("--noise-floor", choices=["analytic", "empirical"], default="analytic")

    p = sub.add_parser("sweep", help="closed-form sweep of one variable")
    _common(p, scenario=False)
    p.add_argument("--variable", choices=VARIABLES, required=True)
    p.add_argument("--formula", choices=FORMULAS, required=True)
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--label", default="")

    for name in sorted(FIGURES):
        p = sub.add_parser(name, help=f"data for figure {name[3:]}")
        p.add_argument("--out", default="out")
        p.add_argument("--verbose", action="store_true")
    return parser


def _load(args) -> ProtocolConfig:
    cfg = load_config(args.config) if args.config else ProtocolConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    return validate_config(cfg)


def _scenarios(name):
    if name == "both":
        return [Scenario.HONEST, Scenario.SPOOFED]
    return [Scenario(name)]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.cmd == "validate":
            cfg = load_config(args.config)
            print(f"ok: {args.config}")
            log.info("%s", cfg)
            return EXIT_OK
        if args.cmd in FIGURES:
            files = emit_results(figure_table(args.cmd), args.out, name=args.cmd)
            _report_files(args.out, files)
            return EXIT_OK

        cfg = _load(args)
        if args.cmd == "run":
            for sc in _scenarios(args.scenario):
                res = run_scenario(cfg, sc, verbose=True, noise_floor=args.noise_floor)
                dest = args.out if args.scenario != "both" else os.path.join(args.out, sc.value)
                _report_files(dest, emit_results(res, dest))
                rv = res.verdict_ranging
                print(
                    f"{sc.value}: detected={rv.detected} delay={rv.estimated_delay} "
                    f"phase={rv.phase_estimate:.4f} "
                    + (
                        f"v_eps={res.estimate.v_eps_hat:.6g} "
                        f"spoof_detected={res.verdict_security.spoof_detected}"
                        if res.estimate
                        else "no estimate"
                    )
                )
        elif args.cmd == "ensemble":
            reports = []
            for sc in _scenarios(args.scenario):
                log.info("running %d %s trials", args.trials, sc.value)
                rep = run_ensemble(
                    cfg, sc, args.trials, parallel=args.parallel, noise_floor=args.noise_floor
                )
                reports.append(rep)
                print(
                    f"{sc.value}: P_d={rep.empirical_p_d:.4f}±{rep.p_d_halfwidth:.4f} "
                    f"P_fa(lag)={rep.empirical_p_fa:.4f}±{rep.p_fa_halfwidth:.4f} "
                    f"delay_acc={rep.delay_accuracy:.4f} "
                    f"spoof_alarm={rep.spoof_alarm_rate:.4f} v_eps={rep.v_eps_mean:.6g}"
                )
            _report_files(args.out, emit_results(reports, args.out))
        elif args.cmd == "sweep":
            lo, hi = default_grid(args.variable, 2)
            grid = np.linspace(
                args.start if args.start is not None else lo,
                args.stop if args.stop is not None else hi,
                args.points,
            )
            spec = SweepSpec(args.variable, grid, label=args.label)
            res = sweep(spec, args.formula, cfg)
            for x, msg in res.errors:
                log.warning("point %r skipped: %s", x, msg)
            _report_files(args.out, emit_results(res, args.out, name="sweep"))
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except StepError as exc:
        if exc.step == "validate":
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"runtime error in step {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _report_files(dest, files):
    for f, n in files.items():
        log.info("wrote %s (%d rows)", os.path.join(dest, f), n)


if __name__ == "__main__":
    sys.exit(main())
