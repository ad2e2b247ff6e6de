"""Command line entry point: ``adaptive-levels run|calibrate|benchmark``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from adaptive_levels.experiment import ExperimentConfig, ExperimentError, assemble_benchmark, calibrate, run_experiment

logger = logging.getLogger("adaptive_levels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-levels", description="Agent-driven adaptive level generation.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="repeated evolution runs with CSV and figure output")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    run.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    run.add_argument("--trace", action="store_true", help="write per-shot traces of the final generation")
    run.add_argument("--workers", type=int, default=None, help="processes for parallel repeats")
    run.add_argument("--no-plot", action="store_true", help="skip the fitness figure")

    cal = sub.add_parser("calibrate", help="match a player to the closest roster agent")
    cal.add_argument("--config", required=True, type=Path)
    cal.add_argument("--seed", type=int, default=None)
    cal.add_argument("--player", default=None, help="roster id standing in for the player")
    cal.add_argument("--out", type=Path, default=None, help="write calibration.json here")

    bench = sub.add_parser("benchmark", help="combine the best levels of several relative-mode runs")
    bench.add_argument("--runs", required=True, nargs="+", type=Path)
    bench.add_argument("--top", required=True, type=int)
    bench.add_argument("--out", type=Path, default=Path("benchmark"))
    return parser


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    out = args.out if args.out is not None else Path(config.output_dir)
    result = run_experiment(
        config, seed=args.seed, out=out, workers=args.workers, trace=args.trace, plot=not args.no_plot
    )
    curve = result.table.mean_curve()
    print(f"{len(result.table.runs)} runs x {result.table.generations} generations -> {out}")
    print(f"mean fitness: gen 0 {curve[0]:.4f}, final {curve[-1]:.4f}")
    return 0


def _cmd_calibrate(args) -> int:
    config = ExperimentConfig.load(args.config)
    report = calibrate(config, seed=args.seed, player=args.player)
    for agent_id, value in report.rmse.items():
        marker = "*" if agent_id == report.chosen else " "
        print(f"{marker} {agent_id:20s} rmse {value:.4f}")
    print(f"chosen: {report.chosen}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "calibration.json"
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _cmd_benchmark(args) -> int:
    entries = assemble_benchmark(args.runs, args.top, out=args.out)
    print(f"{len(entries)} levels -> {args.out}")
    return 0


COMMANDS = {"run": _cmd_run, "calibrate": _cmd_calibrate, "benchmark": _cmd_benchmark}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ExperimentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
