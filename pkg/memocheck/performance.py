"""
Memocheck Performance Monitoring

This module provides the counters the benchmark harness reads (cache
statistics and engine step counts) and a small timing registry for the
parse / transform / solve phases.
"""

import time
from collections import Counter
from dataclasses import dataclass, field
from functools import wraps
from typing import Callable, Dict, Union

from .errors import get_debug_context, DebugLevel


@dataclass
class CacheStats:
    """Counters of one cache instance; monotone within a run."""
    lookups: int = 0
    hits: int = 0
    insertions: int = 0
    evictions: int = 0
    flushes: int = 0
    node_visits: int = 0
    depth_histogram: Counter = field(default_factory=Counter)

    def record_check_depth(self, depth: int):
        self.depth_histogram[depth] += 1

    @property
    def max_check_depth(self) -> int:
        return max(self.depth_histogram) if self.depth_histogram else 0

    @property
    def hit_rate(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0

    def as_dict(self) -> Dict[str, int]:
        return {
            "lookups": self.lookups,
            "hits": self.hits,
            "insertions": self.insertions,
            "evictions": self.evictions,
            "flushes": self.flushes,
            "node_visits": self.node_visits,
            "max_check_depth": self.max_check_depth,
        }


@dataclass
class EngineCounters:
    """Work done by the interpreter itself."""
    steps: int = 0
    calls_checks: int = 0
    success_checks: int = 0
    violations: int = 0
    backtracks: int = 0

    def as_dict(self) -> Dict[str, int]:
        return {
            "steps": self.steps,
            "calls_checks": self.calls_checks,
            "success_checks": self.success_checks,
            "violations": self.violations,
            "backtracks": self.backtracks,
        }


@dataclass
class PerformanceMetrics:
    """Performance metrics for monitoring"""
    call_count: int = 0
    total_duration: float = 0.0
    min_duration: float = float('inf')
    max_duration: float = 0.0
    error_count: int = 0

    def record_call(self, duration: float, success: bool = True):
        """Record a function call"""
        self.call_count += 1
        self.total_duration += duration
        self.min_duration = min(self.min_duration, duration)
        self.max_duration = max(self.max_duration, duration)
        if not success:
            self.error_count += 1

    @property
    def average_duration(self) -> float:
        """Get average call duration"""
        return self.total_duration / self.call_count if self.call_count > 0 else 0.0

    def as_dict(self) -> Dict[str, float]:
        return {
            "calls": self.call_count,
            "total_s": round(self.total_duration, 6),
            "avg_s": round(self.average_duration, 6),
            "errors": self.error_count,
        }


_performance_metrics: Dict[str, PerformanceMetrics] = {}


def get_performance_metrics(name: str = None) -> Union[PerformanceMetrics, Dict[str, PerformanceMetrics]]:
    """Get timing metrics for one phase or all phases"""
    if name:
        return _performance_metrics.get(name, PerformanceMetrics())
    return _performance_metrics.copy()


def reset_performance_metrics():
    """Reset all performance metrics"""
    _performance_metrics.clear()


def timed(name: str) -> Callable[[Callable], Callable]:
    """Record the duration of every call under `name`."""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.time()
            success = True
            try:
                return func(*args, **kwargs)
            except Exception:
                success = False
                raise
            finally:
                duration = time.time() - start
                _performance_metrics.setdefault(name, PerformanceMetrics()).record_call(duration, success)
                debug_ctx = get_debug_context()
                if debug_ctx.performance_monitoring:
                    debug_ctx.log(DebugLevel.DEBUG, f"Performance: {name} took {duration:.4f}s")
        return wrapper
    return decorator
