"""Command-line entry point: ``ccadrive {synth,analyze,run,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .dataset import SCENARIOS, SynthConfig, TargetSpec, load_trials, synthesize_trials, write_trials
from .errors import CcaDriveError
from .pipeline import EvaluationReport, ExperimentConfig, correlation_report, emit_correlations, emit_report, run_experiment


def _scenario_arg(value: str) -> str:
    if value.lower() == "all" or value in SCENARIOS:
        return value
    raise argparse.ArgumentTypeError(f"unknown scenario {value!r}, choose from {', '.join(SCENARIOS)} or all")


def _scenarios(values):
    out = []
    for v in values:
        out.extend(SCENARIOS if v.lower() == "all" else [v])
    return tuple(dict.fromkeys(out))


def cmd_synth(args) -> int:
    config = SynthConfig.from_json(args.config) if args.config else SynthConfig()
    trials = synthesize_trials(_scenarios(args.scenario), args.trials, config, args.seed)
    write_trials(trials, args.out)
    print(f"wrote {len(trials)} trials to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    trials = load_trials(args.data)
    rows = correlation_report(trials, TargetSpec(horizon=args.horizon), lags=args.lags)
    for path in emit_correlations(rows, args.out, args.format):
        print(path)
    for r in rows:
        print(f"{r.channel:>12} {r.participant:>4} rho1={r.rho1:.4f}")
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    out = args.out or config.output_dir
    report = run_experiment(config)
    for path in emit_report(report, out, args.format):
        print(path)
    return 0


def cmd_report(args) -> int:
    report = EvaluationReport.from_json(args.input)
    for path in emit_report(report, args.out, args.format):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccadrive",
                                     description="CCA-gated driver behavior modeling at intersections.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic trials as CSV")
    p.add_argument("--scenario", nargs="+", type=_scenario_arg, default=["all"], help="S1..S4 or 'all'")
    p.add_argument("--trials", type=int, default=50, help="trials per scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="SynthConfig JSON")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="per-participant canonical correlations for both channels")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--horizon", type=int, default=5)
    p.add_argument("--lags", type=int, default=0)
    p.add_argument("--format", nargs="+", choices=("csv", "json", "svg"), default=["csv", "json", "svg"])
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="run the threshold x method experiment grid")
    p.add_argument("--config", type=Path, help="ExperimentConfig JSON (defaults if omitted)")
    p.add_argument("--format", nargs="+", choices=("csv", "json", "svg"), default=["csv", "json", "svg"])
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-render a saved report.json")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--format", nargs="+", choices=("csv", "json", "svg"), default=["svg"])
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except CcaDriveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
