"""
Memocheck Command Line

`memocheck run` solves a goal against a program with run-time checks,
`memocheck check` prints the transformed program and `memocheck bench`
runs the benchmark suite.

Exit codes: 0 success, 1 assertion violations, 2 parse, definition,
configuration or unreadable input errors, 3 run-time evaluation errors,
4 result files that cannot be written. Violations from
branches that failed are listed after the answers.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import yaml

from .config import MemocheckConfig
from .engine import Engine
from .errors import (
    BenchmarkBugError,
    CheckedError,
    ConfigurationError,
    DefinitionError,
    EvaluationError,
    InternalError,
    OutputError,
    ParseError,
    configure_debug,
    get_debug_context,
    parse_debug_level,
)
from .parser import parse_program
from .performance import get_performance_metrics
from .transform import transform_program

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_STATIC = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

logger = logging.getLogger(__name__)


def _on_off(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got {value!r}")


def _sizes(value: str) -> List[int]:
    try:
        sizes = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {value!r}") from None
    if not sizes or any(n < 1 for n in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memocheck", description="Run-time assertion checking with a check cache")
    parser.add_argument("--log-level", default=None,
                        help="NONE, ERROR, WARNING, INFO, DEBUG or TRACE (default: MEMOCHECK_DEBUG_LEVEL or WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a goal with run-time checks")
    run.add_argument("file", type=Path)
    run.add_argument("-g", "--goal", required=True)
    run.add_argument("--rtchecks", type=_on_off)
    run.add_argument("--cache-policy", choices=["lru", "dm", "none"])
    run.add_argument("--cache-size", type=int)
    run.add_argument("--depth-limit", help="positive integer or inf")
    run.add_argument("--invalidation", choices=["flush", "trail"])
    run.add_argument("--on-error", choices=["continue", "abort"])
    run.add_argument("--strict-calls", action="store_const", const=True)
    run.add_argument("--short-circuit", action="store_const", const=True)
    run.add_argument("--occurs-check", action="store_const", const=True)
    run.add_argument("--audit", action="store_const", const=True, help="audit the cache after every step")
    run.add_argument("--shadow", action="store_const", const=True, help="compare every cached check with brute force")
    run.add_argument("--chaos", type=float, help="probability of flushing the cache before a lookup")
    run.add_argument("--chaos-seed", type=int)
    run.add_argument("--limit", type=int, default=None, help="stop after this many answers")
    run.add_argument("--stats", action="store_true", help="print cache and engine counters as YAML")
    run.set_defaults(handler=cmd_run)

    check = sub.add_parser("check", help="print the transformed program")
    check.add_argument("file", type=Path)
    check.add_argument("--yaml", action="store_true", help="print the program summary and automata as YAML")
    check.set_defaults(handler=cmd_check)

    bench = sub.add_parser("bench", help="run the benchmark suite")
    bench.add_argument("--bench", default="all", help="comma-separated names, or all")
    bench.add_argument("--sizes", type=_sizes)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--csv", type=Path, help="write CSV here instead of standard output")
    bench.add_argument("--plot", type=Path, help="directory for gnuplot data, scripts and summary.yaml")
    bench.add_argument("--grid", choices=["full", "quick"], default="full")
    bench.add_argument("--repeat", type=int, default=1, help="runs per cell; the fastest is kept")
    bench.add_argument("--workers", type=int, default=1, help="cells measured in parallel processes")
    bench.set_defaults(handler=cmd_bench)
    return parser


def _overrides(args) -> Dict[str, object]:
    """Only the options the user gave."""
    mapping = {
        "rtchecks": args.rtchecks,
        "cache_policy": args.cache_policy,
        "cache_size": args.cache_size,
        "invalidation": args.invalidation,
        "on_error": args.on_error,
        "strict_calls": args.strict_calls,
        "short_circuit": args.short_circuit,
        "occurs_check": args.occurs_check,
        "debug_audit": args.audit,
        "shadow_check": args.shadow,
        "chaos_flush_rate": args.chaos,
        "chaos_seed": args.chaos_seed,
    }
    overrides = {k: v for k, v in mapping.items() if v is not None}
    if args.depth_limit is not None:
        overrides["depth_limit"] = args.depth_limit
    return overrides


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None


def cmd_run(args) -> int:
    config = MemocheckConfig().with_overrides(**_overrides(args))
    engine = Engine(parse_program(_read(args.file)), config)
    found = 0
    reported = set()
    try:
        for answer in engine.solve(args.goal, limit=args.limit):
            found += 1
            print(f"{answer}.")
            for violation in answer.errors:
                reported.add(violation.asr_id)
                print(f"  % {violation.describe()}")
        if not found:
            print("false.")
        # violations recorded on branches that failed or were backtracked over
        for violation in engine.violations:
            if violation.asr_id not in reported:
                reported.add(violation.asr_id)
                print(f"  % {violation.describe()} (failed branch)")
    finally:
        if args.stats:
            print(yaml.dump(_stats(engine), indent=2, sort_keys=False), end="")
    return EXIT_VIOLATIONS if engine.violations else EXIT_OK


def _stats(engine: Engine) -> Dict[str, object]:
    return {
        "config": engine.cache.config.label,
        "rtchecks": engine.config.rtchecks,
        "cache": engine.stats.as_dict(),
        "engine": engine.counters.as_dict(),
        "timings": {name: m.as_dict() for name, m in get_performance_metrics().items()},
    }


def cmd_check(args) -> int:
    program = parse_program(_read(args.file))
    compiled = transform_program(program)
    if args.yaml:
        data = program.export()
        automata = [compiled.table.automaton(compiled.table.resolve_prop(name, ()))
                    for name, arity in program.regtypes if arity == 1]
        data["automata"] = {a.name: a.dump().splitlines() for a in automata}
        print(yaml.dump(data, indent=2, sort_keys=False), end="")
    else:
        print(compiled.render(), end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import GRIDS, emit_csv, emit_plot, run_bench, select, summarize, write_csv

    grid = GRIDS[args.grid]()
    measurements = []
    for spec in select(args.bench):
        spec = spec.with_inputs(sizes=args.sizes, seed=args.seed)
        measurements.extend(run_bench(spec, grid, repeat=args.repeat, workers=args.workers))
    if args.csv is not None:
        _write(emit_csv, measurements, args.csv)
        print(yaml.dump(summarize(measurements), indent=2, sort_keys=True), end="")
    else:
        write_csv(measurements, sys.stdout)
    if args.plot is not None:
        _write(emit_plot, measurements, args.plot)
    return EXIT_OK


def _write(emit, measurements, path: Path) -> None:
    try:
        emit(measurements, path)
    except OSError as exc:
        logger.error("writing %s failed: %s", path, exc)
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}", details={"path": str(path)}) from None


def _configure_logging(level_name: Optional[str]) -> None:
    level = parse_debug_level(level_name or os.environ.get("MEMOCHECK_DEBUG_LEVEL", "WARNING"))
    logging.basicConfig(level=get_debug_context()._map_to_logging_level(level),
                        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s", stream=sys.stderr)
    configure_debug(level, trace_checks=level.name == "TRACE", trace_cache=level.name == "TRACE")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _configure_logging(args.log_level)
        return args.handler(args)
    except CheckedError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_VIOLATIONS
    except BenchmarkBugError as exc:
        print(f"benchmark error: {exc.message}", file=sys.stderr)
        return EXIT_VIOLATIONS
    except ParseError as exc:
        print(f"{getattr(args, 'file', '<goal>')}: {exc.message}", file=sys.stderr)
        return EXIT_STATIC
    except (DefinitionError, ConfigurationError) as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_STATIC
    except (EvaluationError, InternalError) as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_RUNTIME
    except OutputError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
