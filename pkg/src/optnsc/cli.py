"""Command line entry point: ``optnsc run ...`` and ``optnsc test-lemmas``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import checks
from .exceptions import ConfigError
from .harness import ControllerSpec, ExperimentSettings, emit_report, run_experiment, summary_table
from .plant import ScenarioConfig, read_config_file

_SCENARIO_KEYS = ("scenario", "T", "period", "alpha_phases", "beta_phases", "w_phases", "alpha_noise", "w_noise", "seed", "A", "B")


def build_parser():
    parser = argparse.ArgumentParser(prog="optnsc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="roll out controllers on a scenario and write regret reports")
    run.add_argument("--config", help="key = value file; its entries override the flags")
    run.add_argument("--scenario", default="a", choices=["a", "b", "c", "custom"])
    run.add_argument("--T", type=int, default=1000)
    run.add_argument("--rho", type=float, default=0.9)
    run.add_argument("--oracle", default="bernoulli", choices=["perfect", "zero", "bernoulli"])
    run.add_argument("--controllers", default="optftrl,gpc,optimal",
                     help="comma list of optftrl[:oracle[=rho]], gpc, optimal")
    run.add_argument("--d", default="10", help="memory/delay length or 'auto'")
    run.add_argument("--p", type=int, default=10)
    run.add_argument("--kappa-m", dest="kappa_M", type=float, default=1.0)
    run.add_argument("--epsilon", type=float, default=1.0)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="results")
    run.add_argument("--plot", action="store_true", help="also write avg_regret.png")

    lemmas = sub.add_parser("test-lemmas", help="run the gradient, truncation and rearrangement checks")
    lemmas.add_argument("--quick", action="store_true")
    return parser


def _merge_config(args):
    values = {key: getattr(args, key) for key in ("scenario", "T", "seed")}
    if args.config:
        file_values = read_config_file(args.config)
        aliases = {"kappa_m": "kappa_M"}
        for key, value in file_values.items():
            key = aliases.get(key, key)
            if key in _SCENARIO_KEYS:
                values[key] = value
            elif hasattr(args, key):
                setattr(args, key, type(getattr(args, key))(value) if getattr(args, key) is not None else value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
    return values


def cmd_run(args):
    scenario_values = _merge_config(args)
    config = ScenarioConfig.from_mapping(scenario_values)
    d = args.d if str(args.d) == "auto" else int(args.d)
    specs = [ControllerSpec.parse(tok, args.oracle, args.rho) for tok in str(args.controllers).split(",") if tok.strip()]
    settings = ExperimentSettings(d=d, p=args.p, kappa_M=args.kappa_M, epsilon=args.epsilon, controllers=specs)
    report = run_experiment(config, settings, seed=config.seed)
    paths = emit_report(report, args.out, plot=args.plot)
    print(summary_table(report), end="")
    for path in paths:
        print(f"wrote {path}")
    for run in report.runs.values():
        if run.failed:
            print(f"run {run.label} FAILED: {run.error}", file=sys.stderr)
    return 1 if report.failed else 0


def cmd_test_lemmas(args):
    results = checks.run_all(quick=args.quick)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_test_lemmas(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
