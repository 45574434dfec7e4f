"""Command line: simulate, bench, attack-gen, validate.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .attacks import attack_summary
from .exceptions import ConfigError, GridShieldError, NumericalError
from .harness import bench_runtime, emit_report, emit_runtime_table, load_scenario, monte_carlo, report_csv, run_scenario
from .plant import load_model, model_from_file, resolve_model_path, validate_model
from .schemas import AttackRequest, ModelFile
from .settings import BENCH_MIN_REPS, BENCH_STEPS, configure_logging

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _p_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridshield", description="Attack-resilient dynamic state estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default from GRIDSHIELD_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write the RMSE report")
    sim.add_argument("--config", required=True, type=Path)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--runs", type=int)
    sim.add_argument("--out", type=Path)
    sim.add_argument("--format", choices=("csv", "json"), default="csv")

    bench = sub.add_parser("bench", help="runtime table for n = 3p random models")
    bench.add_argument("--p", type=_p_list, default=[10, 25, 50])
    bench.add_argument("--reps", type=int, default=BENCH_MIN_REPS)
    bench.add_argument("--steps", type=int, default=BENCH_STEPS)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", type=Path, required=True)

    gen = sub.add_parser("attack-gen", help="realize an attack spec against a model")
    gen.add_argument("--model", required=True)
    gen.add_argument("--spec", required=True, type=Path)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path)

    val = sub.add_parser("validate", help="check a model file")
    val.add_argument("--model", required=True)
    return parser


def _write_or_print(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    logger.info("simulating %s (seed %d)", args.config, cfg.seed)
    report = monte_carlo(cfg, args.runs) if args.runs is not None else run_scenario(cfg)
    out = args.out or (Path(cfg.output_path) if cfg.output_path else None)
    if out is None:
        _write_or_print(report_csv(report) if args.format == "csv" else report.model_dump_json(indent=2), None)
    else:
        emit_report(report, out, args.format)
    return EXIT_OK


def cmd_bench(args) -> int:
    table = bench_runtime(args.p, reps=args.reps, steps=args.steps, seed=args.seed)
    emit_runtime_table(table, args.out)
    failed = [r for r in table.rows if r.error]
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_attack_gen(args) -> int:
    model = load_model(args.model)
    try:
        spec = json.loads(args.spec.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read attack spec {args.spec}: {exc}")
    try:
        request = AttackRequest.model_validate({"spec": spec, "seed": args.seed})
    except ValidationError as exc:
        raise ConfigError(f"{args.spec}: {exc}")
    out = attack_summary(request.spec, model, np.random.default_rng(request.seed))
    _write_or_print(out.model_dump_json(indent=2, exclude_none=True), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    path = resolve_model_path(args.model)
    try:
        spec = ModelFile.model_validate_json(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {path}")
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}")
    report = validate_model(model_from_file(spec, check_rank=False))
    _write_or_print(report.model_dump_json(indent=2), None)
    return EXIT_OK if report.ok else EXIT_CONFIG


COMMANDS = {
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "attack-gen": cmd_attack_gen,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level.upper() if args.log_level else None)
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GridShieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
