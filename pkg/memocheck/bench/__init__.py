"""
Memocheck Benchmarks

Insertion benchmarks with their assertions, the measurement harness and its
CSV / plot output.
"""

from .harness import (
    BASELINE,
    CSV_COLUMNS,
    GRIDS,
    UNCACHED,
    Measurement,
    counter_ratio,
    default_grid,
    emit_csv,
    emit_plot,
    measure,
    quick_grid,
    run_bench,
    summarize,
    time_ratio,
    write_csv,
)
from .suite import BENCHMARKS, DEFAULT_SIZES, SENTINEL, BenchSpec, Group, get_bench, load_source, select

__all__ = [
    "BASELINE",
    "BENCHMARKS",
    "CSV_COLUMNS",
    "DEFAULT_SIZES",
    "GRIDS",
    "SENTINEL",
    "UNCACHED",
    "BenchSpec",
    "Group",
    "Measurement",
    "counter_ratio",
    "default_grid",
    "emit_csv",
    "emit_plot",
    "get_bench",
    "load_source",
    "measure",
    "quick_grid",
    "run_bench",
    "select",
    "summarize",
    "time_ratio",
    "write_csv",
]
