"""
Memocheck Benchmark Harness

This module provides the measurement loop over (size x cache configuration)
cells, CSV output, gnuplot data and scripts for overhead-ratio plots and the
YAML summary comparing cached and uncached checking.
"""

import csv
import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import yaml
from pydantic import BaseModel

from ..cache import CacheConfig, CachePolicy
from ..config import MemocheckConfig
from ..engine import Engine
from ..errors import BenchmarkBugError
from ..parser import parse_program
from .suite import BenchSpec

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "benchmark", "size", "policy", "capacity", "depth_limit", "rtchecks", "wall_ms",
    "node_visits", "lookups", "hits", "insertions", "evictions", "flushes", "max_check_depth",
)

# A grid cell: run-time checks on or off, and the cache to check with.
Cell = Tuple[bool, CacheConfig]

NO_CACHE = CacheConfig(policy=CachePolicy.NONE, capacity=0)
BASELINE: Cell = (False, NO_CACHE)
UNCACHED: Cell = (True, NO_CACHE)


def default_grid() -> List[Cell]:
    """Both reference rows plus every policy x capacity x depth limit."""
    grid = [BASELINE, UNCACHED]
    for policy in (CachePolicy.LRU, CachePolicy.DIRECT_MAPPED):
        for capacity in (1, 8, 16, 64, 256):
            for depth in (1, 2, 3, 4, 5, None):
                grid.append((True, CacheConfig(policy=policy, capacity=capacity, depth_limit=depth)))
    return grid


def quick_grid() -> List[Cell]:
    grid = [BASELINE, UNCACHED]
    for policy in (CachePolicy.LRU, CachePolicy.DIRECT_MAPPED):
        for depth in (1, 2, None):
            grid.append((True, CacheConfig(policy=policy, capacity=256, depth_limit=depth)))
    return grid


GRIDS = {"full": default_grid, "quick": quick_grid}


class Measurement(BaseModel):
    """Counters and best wall time of one (benchmark, size, configuration) cell."""
    benchmark: str
    size: int
    policy: CachePolicy
    capacity: int
    depth_limit: Optional[int]
    rtchecks: bool
    wall_ms: float
    node_visits: int = 0
    lookups: int = 0
    hits: int = 0
    insertions: int = 0
    evictions: int = 0
    flushes: int = 0
    max_check_depth: int = 0
    steps: int = 0

    @property
    def label(self) -> str:
        if not self.rtchecks:
            return "off"
        return self.cache_config().label

    @property
    def is_baseline(self) -> bool:
        return not self.rtchecks

    @property
    def is_uncached(self) -> bool:
        return self.rtchecks and self.policy is CachePolicy.NONE

    def cache_config(self) -> CacheConfig:
        return CacheConfig(policy=self.policy, capacity=self.capacity, depth_limit=self.depth_limit)

    def counters(self) -> Dict[str, int]:
        return self.model_dump(exclude={"benchmark", "size", "policy", "capacity", "depth_limit",
                                        "rtchecks", "wall_ms"})

    def row(self) -> List[str]:
        depth = "inf" if self.depth_limit is None else str(self.depth_limit)
        return [
            self.benchmark, str(self.size), self.policy.value, str(self.capacity), depth,
            "on" if self.rtchecks else "off", f"{self.wall_ms:.3f}",
            str(self.node_visits), str(self.lookups), str(self.hits), str(self.insertions),
            str(self.evictions), str(self.flushes), str(self.max_check_depth),
        ]

    def sort_key(self) -> tuple:
        depth = self.depth_limit if self.depth_limit is not None else 1 << 30
        return (self.benchmark, self.size, self.policy.value, self.capacity, depth, self.rtchecks)


# =============================================================================
# MEASURING
# =============================================================================

def measure(spec: BenchSpec, size: int, rtchecks: bool, cache: CacheConfig,
            repeat: int = 1, config: Optional[MemocheckConfig] = None) -> Measurement:
    """Run one cell `repeat` times; keep the fastest run.

    Raises BenchmarkBugError when the program fails, violates one of its
    assertions, or produces different counters on a rerun.
    """
    source = spec.source()
    keys = spec.keys(size)
    config = (config or MemocheckConfig()).with_overrides(rtchecks=rtchecks).with_cache(cache)
    best: Optional[float] = None
    counters: Optional[Dict[str, int]] = None
    for _ in range(max(1, repeat)):
        engine = Engine(parse_program(source), config)
        goal = spec.goal(keys, engine.make)
        start = time.perf_counter()
        answers = engine.run(goal, limit=1)
        elapsed = (time.perf_counter() - start) * 1000.0
        if not answers:
            raise BenchmarkBugError(f"{spec.name} failed at size {size}",
                                    details={"config": cache.label, "rtchecks": rtchecks})
        if engine.violations:
            raise BenchmarkBugError(f"{spec.name} violated its assertions at size {size}: "
                                    f"{engine.violations[0].describe()}",
                                    details={"violations": len(engine.violations), "config": cache.label})
        snapshot = engine.stats.as_dict()
        snapshot["steps"] = engine.counters.steps
        if counters is not None and snapshot != counters:
            raise BenchmarkBugError(f"{spec.name} counters differ between repeats",
                                    details={"first": counters, "second": snapshot})
        counters = snapshot
        best = elapsed if best is None else min(best, elapsed)
    logger.info("%s n=%d %s: %.1f ms, %d visits", spec.name, size,
                "off" if not rtchecks else cache.label, best, counters["node_visits"])
    return Measurement(benchmark=spec.name, size=size, policy=cache.policy, capacity=cache.capacity,
                       depth_limit=cache.depth_limit, rtchecks=rtchecks, wall_ms=best, **counters)


def _measure_cell(args) -> Measurement:
    spec, size, rtchecks, cache, repeat = args
    return measure(spec, size, rtchecks, cache, repeat)


def run_bench(spec: BenchSpec, grid: Optional[Sequence[Cell]] = None, repeat: int = 1,
              workers: int = 1) -> List[Measurement]:
    """One Measurement per (size x grid cell), in CSV row order."""
    grid = list(grid) if grid is not None else default_grid()
    if BASELINE not in grid:
        grid.insert(0, BASELINE)
    if UNCACHED not in grid:
        grid.insert(1, UNCACHED)
    cells = [(spec, size, rtchecks, cache, repeat) for size in spec.sizes for rtchecks, cache in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_measure_cell, cells))
    else:
        results = [_measure_cell(cell) for cell in cells]
    return sorted(results, key=Measurement.sort_key)


# =============================================================================
# RATIOS
# =============================================================================

def baselines(measurements: Iterable[Measurement]) -> Dict[Tuple[str, int], Measurement]:
    return {(m.benchmark, m.size): m for m in measurements if m.is_baseline}


def time_ratio(m: Measurement, baseline: Measurement) -> float:
    return m.wall_ms / baseline.wall_ms if baseline.wall_ms > 0 else float("nan")


def counter_ratio(m: Measurement, baseline: Measurement) -> float:
    """(resolution steps + check node visits) over the unchecked step count."""
    return (m.steps + m.node_visits) / baseline.steps if baseline.steps else float("nan")


def summarize(measurements: Sequence[Measurement]) -> Dict[str, Dict[str, object]]:
    """Per benchmark at its largest size: uncached and best cached ratios and their gap."""
    base = baselines(measurements)
    by_bench: Dict[str, List[Measurement]] = defaultdict(list)
    for m in measurements:
        by_bench[m.benchmark].append(m)
    summary: Dict[str, Dict[str, object]] = {}
    for name, rows in by_bench.items():
        largest = max(m.size for m in rows)
        baseline = base.get((name, largest))
        if baseline is None:
            continue
        at_size = [m for m in rows if m.size == largest and m.rtchecks]
        uncached = [m for m in at_size if m.is_uncached]
        cached = [m for m in at_size if not m.is_uncached]
        entry: Dict[str, object] = {"size": largest, "baseline_ms": round(baseline.wall_ms, 3)}
        if uncached:
            entry["uncached_time_ratio"] = round(time_ratio(uncached[0], baseline), 3)
            entry["uncached_counter_ratio"] = round(counter_ratio(uncached[0], baseline), 3)
        if cached:
            best = min(cached, key=lambda m: counter_ratio(m, baseline))
            entry["best_cached"] = best.label
            entry["cached_time_ratio"] = round(time_ratio(best, baseline), 3)
            entry["cached_counter_ratio"] = round(counter_ratio(best, baseline), 3)
            entry["max_check_depth"] = best.max_check_depth
        if uncached and cached:
            entry["counter_ratio_gap"] = round(entry["uncached_counter_ratio"] / entry["cached_counter_ratio"], 3)
        summary[name] = entry
    return summary


# =============================================================================
# OUTPUT
# =============================================================================

def write_csv(measurements: Iterable[Measurement], handle: TextIO) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for m in sorted(measurements, key=Measurement.sort_key):
        writer.writerow(m.row())


def emit_csv(measurements: Iterable[Measurement], path: Union[str, Path]) -> Path:
    """Write one row per measurement under the fixed header."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        write_csv(measurements, handle)
    return path


def _series(rows: List[Measurement], base: Dict[Tuple[str, int], Measurement]):
    labels: List[str] = []
    table: Dict[int, Dict[str, Tuple[float, float]]] = defaultdict(dict)
    for m in rows:
        baseline = base.get((m.benchmark, m.size))
        if baseline is None:
            continue
        if m.label not in labels:
            labels.append(m.label)
        table[m.size][m.label] = (time_ratio(m, baseline), counter_ratio(m, baseline))
    return labels, table


def _gnuplot_series(name: str, data: Path, labels: List[str]) -> str:
    lines = [
        f"set title \"{name}: run-time check overhead\"",
        "set xlabel \"size\"",
        "set ylabel \"overhead ratio\"",
        "set logscale y",
        "set key outside right",
        "set terminal svg size 900,500",
        f"set output \"{name}.svg\"",
    ]
    plots = [f"\"{data.name}\" using 1:{2 + 2 * i} with linespoints title \"{label}\""
             for i, label in enumerate(labels)]
    lines.append("plot " + ", \\\n     ".join(plots))
    lines.append(f"set output \"{name}-counters.svg\"")
    plots = [f"\"{data.name}\" using 1:{3 + 2 * i} with linespoints title \"{label}\""
             for i, label in enumerate(labels)]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _gnuplot_bars(name: str, data: Path) -> str:
    return "\n".join([
        f"set title \"{name}: run-time check overhead\"",
        "set style data histogram",
        "set style fill solid",
        "set xtics rotate by -45",
        "set terminal svg size 900,500",
        f"set output \"{name}.svg\"",
        f"plot \"{data.name}\" using 2:xtic(1) title \"time\", '' using 3 title \"counters\"",
    ]) + "\n"


def emit_plot(measurements: Sequence[Measurement], directory: Union[str, Path]) -> List[Path]:
    """Write `<benchmark>.dat` and `<benchmark>.gp` per benchmark plus `summary.yaml`.

    With at least two sizes the data holds one time-ratio and one
    counter-ratio column per configuration; with a single size it holds
    one bar per configuration instead.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = baselines(measurements)
    by_bench: Dict[str, List[Measurement]] = defaultdict(list)
    for m in sorted(measurements, key=Measurement.sort_key):
        by_bench[m.benchmark].append(m)
    written: List[Path] = []
    for name, rows in by_bench.items():
        labels, table = _series(rows, base)
        sizes = sorted(table)
        if len(sizes) >= 2:
            data = directory / f"{name}.dat"
            with data.open("w", encoding="utf-8") as out:
                out.write("# size " + " ".join(f"{l}:time {l}:counters" for l in labels) + "\n")
                for size in sizes:
                    cols = [str(size)]
                    for label in labels:
                        t, c = table[size].get(label, (float("nan"), float("nan")))
                        cols.extend((f"{t:.4f}", f"{c:.4f}"))
                    out.write(" ".join(cols) + "\n")
            script = _gnuplot_series(name, data, labels)
        else:
            data = directory / f"{name}.bar.dat"
            with data.open("w", encoding="utf-8") as out:
                out.write("# config time counters\n")
                for size in sizes:
                    for label in labels:
                        t, c = table[size][label]
                        out.write(f"{label} {t:.4f} {c:.4f}\n")
            script = _gnuplot_bars(name, data)
        gp = directory / f"{name}.gp"
        gp.write_text(script, encoding="utf-8")
        written.extend((data, gp))
    summary = directory / "summary.yaml"
    summary.write_text(yaml.dump(summarize(measurements), indent=2, sort_keys=True), encoding="utf-8")
    written.append(summary)
    return written
