"""Command line front end.

`jamscatter run` trains the configured agents and writes a CSV of
windowed metrics plus a rendered PNG next to it. `jamscatter plot`
re-renders a figure from an existing CSV.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .harness import (
    ConfigError,
    ExperimentSpec,
    FIGURES,
    emit_csv,
    load_spec,
    parse_csv,
    run_experiment,
    sweep_defaults,
)
from .agents import AGENT_KINDS, TrainConfig
from .env import EnvConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jamscatter",
        description="Train anti-jamming link agents and report their metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train agents and emit CSV + figure")
    run.add_argument("--config", help="JSON experiment description")
    run.add_argument("--figure", choices=FIGURES, help="use a preset comparison")
    run.add_argument("--agent", choices=AGENT_KINDS, help="restrict to one agent kind")
    run.add_argument("--seeds", help="comma-separated seed list, e.g. 1,2,3")
    run.add_argument("--iterations", type=int, help="training slots per cell")
    run.add_argument("--out", help="CSV output path")
    run.add_argument("--workers", type=int, default=1, help="parallel training processes")
    run.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    run.add_argument(
        "--selfcheck",
        action="store_true",
        help="run the oracle cross-validation suite instead of training",
    )

    plot = sub.add_parser("plot", help="render the figure for an existing CSV")
    plot.add_argument("csv", help="CSV produced by `jamscatter run`")
    plot.add_argument("--out", help="PNG path (defaults next to the CSV)")
    plot.add_argument("--title", help="figure title")
    return parser


def _run(args) -> int:
    if args.selfcheck:
        from .selfcheck import run_selfcheck

        return 1 if run_selfcheck() else 0

    spec = load_spec(args.config) if args.config else ExperimentSpec(EnvConfig(), TrainConfig())
    if args.figure:
        spec = sweep_defaults(args.figure, base=spec)
    if args.agent:
        spec = dataclasses.replace(spec, kinds=(args.agent,))
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(","))
        spec = dataclasses.replace(spec, seeds=seeds)
    if args.iterations:
        spec = dataclasses.replace(
            spec, train=dataclasses.replace(spec.train, iterations=args.iterations)
        )
    out = args.out or spec.out or f"{args.figure or 'run'}.csv"
    spec = dataclasses.replace(spec, out=out)

    rows = run_experiment(spec, workers=args.workers, log=lambda m: print(m, file=sys.stderr))
    emit_csv(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    if not args.no_plot:
        from .plots import figure_path_for, render_report

        png = render_report(rows, figure_path_for(out), title=args.figure)
        print(f"rendered {png}")
    return 0


def _plot(args) -> int:
    from .plots import figure_path_for, render_report

    rows = parse_csv(args.csv)
    png = render_report(rows, args.out or figure_path_for(args.csv), title=args.title)
    print(f"rendered {png}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        return _plot(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
