"""
Command-line interface for the tracking toolkit.
Sub-commands: simulate, analyze, optimize, reproduce, sweep, presets.
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from agents.analytic import analyzer
from agents.channel import success_probability
from agents.engine import SCALAR_METRICS, simulator
from agents.optimize import optimizer
from agents.reproduce import TARGETS, reproducer
from agents.sweep import sweeper
from services.config import REPO_ROOT
from services.errors import ConfigurationError, TrackingError
from services.logging_setup import configure_logging
from services.report import reproduction_report
from services.run_config import describe_validation_error, load_raw, load_run_config
from services.storage import RunManifest, joint_chain_frame, write_csv, write_manifest

logger = logging.getLogger(__name__)

PRESETS_DIR = REPO_ROOT / "configs" / "examples"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _finish(command: str, frame: pd.DataFrame, out: Optional[str], config: dict,
            seeds: List[int], started: float) -> None:
    path = write_csv(frame, out)
    if path is not None:
        manifest = RunManifest(
            command=command,
            config=config,
            seeds=seeds,
            output=str(path),
            duration_s=time.perf_counter() - started,
        )
        write_manifest(manifest)


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = load_run_config(args.config, seed=args.seed, horizon=args.slots, warmup=args.warmup)

    if args.replicas > 1:
        result = simulator.replicate(cfg, args.replicas, workers=args.workers)
        rows = [report.row() for report in result.reports]
        pooled = dict(result.mean)
        pooled.update({"slots": cfg.horizon, "seed": cfg.seed, "replica": "pooled"})
        spread = dict(result.stderr)
        spread.update({"slots": cfg.horizon, "seed": cfg.seed, "replica": "stderr"})
        rows.extend([pooled, spread])
    else:
        rows = [simulator.run(cfg).row()]

    frame = pd.DataFrame(rows, columns=list(SCALAR_METRICS) + ["slots", "seed", "replica"])
    config = cfg.model_dump(mode="json")
    config["replicas"] = args.replicas
    _finish("simulate", frame, args.out, config, [cfg.seed], started)
    return EXIT_OK


def cmd_analyze(args) -> int:
    started = time.perf_counter()
    cfg = load_run_config(args.config)
    report = analyzer.evaluate(cfg)

    if args.dump_joint_chain:
        chain = analyzer.build_joint_chain(cfg.source, cfg.policy, success_probability(cfg.channel))
        write_csv(joint_chain_frame(chain.matrix, chain.n), args.dump_joint_chain)

    row = report.row()
    row["method"] = report.method
    frame = pd.DataFrame([row])
    _finish("analyze", frame, args.out, cfg.model_dump(mode="json"), [cfg.seed], started)
    return EXIT_OK


def cmd_optimize(args) -> int:
    started = time.perf_counter()
    cfg = load_run_config(args.config)
    if cfg.budget is None:
        raise ConfigurationError("optimize needs a 'budget' section with delta and delta_max")
    p_s = success_probability(cfg.channel)

    if args.problem == 1:
        solution = optimizer.solve_problem1(cfg.source, p_s, cfg.budget, cfg.xhat0)
        row = {
            "decision": solution.decision,
            "p_alpha_star": solution.p_alpha_star,
            "objective": solution.p_e_star,
            "baseline": solution.p_e_ns,
            "sampling_fraction": solution.p_alpha_star,
            "method": solution.method,
        }
    else:
        solution = optimizer.solve_problem2_for_source(cfg.source, p_s, cfg.budget, cfg.xhat0)
        row = {
            "decision": solution.decision,
            "n_star": solution.n_star,
            "n_unclamped": solution.n_unclamped,
            "objective": solution.c_bar,
            "baseline": solution.p_ns / (1.0 - solution.p_ns),
            "sampling_fraction": solution.sampling_fraction,
            "p_ns": solution.p_ns,
            "p_as": solution.p_as,
        }

    config = cfg.model_dump(mode="json")
    config["problem"] = args.problem
    _finish("optimize", pd.DataFrame([row]), args.out, config, [], started)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    started = time.perf_counter()
    frame = reproducer.reproduce(args.target, slots=args.slots, seed=args.seed)
    seed = reproducer.repro_config["seed"] if args.seed is None else args.seed
    config = {
        "target": args.target,
        "slots": args.slots or reproducer.repro_config["slots"],
        "seed": seed,
        "uniform_period": reproducer.repro_config["uniform_period"],
    }
    _finish("reproduce", frame, args.out, config, [seed], started)

    if args.report:
        Path(args.report).write_text(reproduction_report.render(args.target, frame), encoding="utf-8")
    return EXIT_OK


def _parse_grid(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"grid must be comma-separated numbers: {text}") from exc
    if not values:
        raise ConfigurationError("grid is empty")
    return values


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    raw = load_raw(args.config)
    grid = _parse_grid(args.grid)
    frame = sweeper.run(raw, args.param, grid, analytic=args.analytic, workers=args.workers,
                        horizon=args.slots, seed=args.seed)
    config = {"base": raw, "parameter": args.param, "grid": grid, "analytic": args.analytic,
              "slots": args.slots, "seed": args.seed}
    seeds = [args.seed] if args.seed is not None else []
    _finish("sweep", frame, args.out, config, seeds, started)
    return EXIT_OK


def cmd_presets(args) -> int:
    presets = {}
    for path in sorted(PRESETS_DIR.glob("*.json")):
        cfg = load_run_config(path)
        channel = cfg.channel.model_dump(exclude_none=True)
        presets[path.stem] = {
            "file": str(path.relative_to(REPO_ROOT)),
            "source": cfg.source.model_dump(),
            "channel": channel,
            "policy": cfg.policy.model_dump(),
            "budget": cfg.budget.model_dump() if cfg.budget else None,
        }

    if args.format == "json":
        print(json.dumps(presets, indent=2))
    else:
        print("Bundled run configurations")
        print("=" * 60)
        for name, info in presets.items():
            print(f"\n{name}:")
            for key, value in info.items():
                print(f"  {key}: {value}")
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracksim",
        description="Remote tracking of Markov sources over erasure channels",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    sim_parser = subparsers.add_parser("simulate", help="Monte-Carlo simulation of a run config")
    sim_parser.add_argument("config", help="JSON or YAML run configuration")
    sim_parser.add_argument("--seed", type=int, help="Override the configured seed")
    sim_parser.add_argument("--slots", type=int, help="Override the horizon")
    sim_parser.add_argument("--warmup", type=int, help="Slots discarded before measuring")
    sim_parser.add_argument("--replicas", type=_positive_int, default=1, help="Independent replicas to pool")
    sim_parser.add_argument("--workers", type=int, help="Worker processes for replicas")
    sim_parser.add_argument("-o", "--out", help="Output CSV (stdout when omitted)")

    analyze_parser = subparsers.add_parser("analyze", help="Analytic evaluation (rs, change_aware, semantics_aware)")
    analyze_parser.add_argument("config", help="JSON or YAML run configuration")
    analyze_parser.add_argument("--dump-joint-chain", metavar="PATH", help="Write the joint-chain matrix as CSV")
    analyze_parser.add_argument("-o", "--out", help="Output CSV (stdout when omitted)")

    opt_parser = subparsers.add_parser("optimize", help="Solve a budgeted sampling problem")
    opt_parser.add_argument("config", help="Run configuration with a budget section")
    opt_parser.add_argument("--problem", type=int, choices=[1, 2], required=True,
                            help="1: least reconstruction error, 2: least consecutive error")
    opt_parser.add_argument("-o", "--out", help="Output CSV (stdout when omitted)")

    repro_parser = subparsers.add_parser("reproduce", help="Reproduce a published table or figure")
    repro_parser.add_argument("target", choices=TARGETS, help="Table or figure")
    repro_parser.add_argument("--slots", type=int, help="Horizon of simulated cells")
    repro_parser.add_argument("--seed", type=int, help="Base seed of simulated cells")
    repro_parser.add_argument("--report", metavar="PATH", help="Also write a markdown summary")
    repro_parser.add_argument("-o", "--out", help="Output CSV (stdout when omitted)")

    sweep_parser = subparsers.add_parser("sweep", help="Sweep one parameter")
    sweep_parser.add_argument("config", help="JSON or YAML run configuration")
    sweep_parser.add_argument("--param", required=True, help="Parameter, e.g. p_s, gamma_db or policy.p_alpha")
    sweep_parser.add_argument("--grid", required=True, help="Comma-separated values")
    sweep_parser.add_argument("--analytic", action="store_true", help="Evaluate analytically instead of simulating")
    sweep_parser.add_argument("--workers", type=int, help="Worker processes for simulated points")
    sweep_parser.add_argument("--slots", type=int, help="Override the horizon")
    sweep_parser.add_argument("--seed", type=int, help="Override the configured seed")
    sweep_parser.add_argument("-o", "--out", help="Output CSV (stdout when omitted)")

    presets_parser = subparsers.add_parser("presets", help="List bundled run configurations")
    presets_parser.add_argument("--format", choices=["text", "json"], default="text", help="Output format")

    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "reproduce": cmd_reproduce,
    "sweep": cmd_sweep,
    "presets": cmd_presets,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    configure_logging(args.log_level)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"config error:\n{describe_validation_error(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrackingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        logger.exception("unexpected failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
