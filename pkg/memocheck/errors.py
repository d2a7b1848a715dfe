"""
Memocheck Error Handling and Debugging Support

This module provides the exception hierarchy raised by the parser, the
transformation and the checking engine, plus the shared debug context that
the checker and the cache log through.
"""

import json
import logging
import sys
import traceback
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

# =============================================================================
# ERROR HANDLING AND DEBUGGING SUPPORT
# =============================================================================

TRACE_LEVEL_NUM = 5
if not hasattr(logging, "TRACE"):
    logging.addLevelName(TRACE_LEVEL_NUM, "TRACE")
    logging.TRACE = TRACE_LEVEL_NUM  # type: ignore[attr-defined]

    def trace(self: logging.Logger, msg, *args, **kwargs):  # pragma: no cover - thin shim
        if self.isEnabledFor(TRACE_LEVEL_NUM):
            self._log(TRACE_LEVEL_NUM, msg, args, **kwargs)

    logging.Logger.trace = trace  # type: ignore[attr-defined]


class MemocheckError(Exception):
    """Base exception class for memocheck errors."""

    def __init__(self, message: str, error_code: str = None, details: Dict[str, Any] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        self.timestamp = datetime.now()
        self.traceback_info = traceback.format_exc() if sys.exc_info()[0] else None


class ParseError(MemocheckError):
    """Raised when source text does not follow the clause grammar."""

    def __init__(self, message: str, line: int, expected: Optional[str] = None):
        text = f"line {line}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text, details={"line": line, "expected": expected})
        self.line = line
        self.expected = expected


class DefinitionError(MemocheckError):
    """Raised when a program is syntactically valid but ill-defined."""
    pass


class InstantiationDepthError(DefinitionError):
    """Raised when a parametric regtype keeps expanding into new instances."""
    pass


class InternalError(MemocheckError):
    """Raised when an engine data structure is used against its contract."""
    pass


class CacheAuditError(InternalError):
    """Raised by debug audits when the cache holds a fact the oracle rejects."""
    pass


class EvaluationError(MemocheckError):
    """Raised when a built-in goal cannot be evaluated."""
    pass


class CheckedError(MemocheckError):
    """Raised in abort mode at the first assertion violation."""

    def __init__(self, violation, errors=()):
        super().__init__(violation.describe(), details={"asr_id": violation.asr_id})
        self.violation = violation
        self.errors = tuple(errors)


class BenchmarkBugError(MemocheckError):
    """Raised when a benchmark program violates its own assertions."""
    pass


class ConfigurationError(MemocheckError):
    """Raised when configuration is invalid."""
    pass


class OutputError(MemocheckError):
    """Raised when a result file cannot be written."""
    pass


class DebugLevel(Enum):
    """Debug levels for memocheck"""
    NONE = 0
    ERROR = 1
    WARNING = 2
    INFO = 3
    DEBUG = 4
    TRACE = 5


@dataclass
class DebugContext:
    """Context for debugging information"""
    level: DebugLevel = DebugLevel.WARNING
    enabled: bool = True
    logger: logging.Logger = field(default_factory=lambda: logging.getLogger('memocheck'))
    trace_checks: bool = False
    trace_cache: bool = False
    trace_steps: bool = False
    performance_monitoring: bool = False

    def __post_init__(self):
        if not self.logger.handlers:
            self.logger.addHandler(logging.NullHandler())
        self.logger.propagate = True
        self.logger.setLevel(self._map_to_logging_level(self.level))

    def _map_to_logging_level(self, level: DebugLevel) -> int:
        """Convert DebugLevel to stdlib logging level"""
        mapping = {
            DebugLevel.NONE: logging.CRITICAL + 1,
            DebugLevel.ERROR: logging.ERROR,
            DebugLevel.WARNING: logging.WARNING,
            DebugLevel.INFO: logging.INFO,
            DebugLevel.DEBUG: logging.DEBUG,
            DebugLevel.TRACE: getattr(logging, "TRACE", logging.DEBUG),
        }
        return mapping.get(level, logging.INFO)

    def log(self, level: DebugLevel, message: str, **kwargs):
        """Log a message with context"""
        if not self.enabled or level.value > self.level.value:
            return

        extra_info = ""
        if kwargs:
            extra_info = f" | {json.dumps(kwargs, default=str)}"
        self.logger.log(self._map_to_logging_level(level), f"{message}{extra_info}")

    def trace_check(self, prop: str, verdict: bool, visits: int = 0, cached: bool = False):
        """Trace a single prop evaluation"""
        if not self.trace_checks:
            return
        self.log(DebugLevel.TRACE, f"Check: {prop}", verdict=verdict, visits=visits, cached=cached)

    def log_cache(self, event: str, **details):
        """Log cache maintenance events (flushes, invalidations, audits)"""
        if not self.trace_cache:
            return
        self.log(DebugLevel.TRACE, f"Cache: {event}", **details)


_debug_context = DebugContext()


def get_debug_context() -> DebugContext:
    """Get the global debug context"""
    return _debug_context


def parse_debug_level(value) -> DebugLevel:
    """Accept a DebugLevel, its name, or its number."""
    if isinstance(value, DebugLevel):
        return value
    if isinstance(value, int):
        return DebugLevel(value)
    try:
        return DebugLevel[str(value).upper()]
    except KeyError:
        raise ConfigurationError(f"unknown debug level: {value}") from None


def set_debug_level(level: DebugLevel) -> None:
    """Set the global debug level."""
    _debug_context.level = level
    _debug_context.enabled = level != DebugLevel.NONE
    _debug_context.logger.setLevel(_debug_context._map_to_logging_level(level))
    _debug_context.logger.disabled = not _debug_context.enabled


def configure_debug(level: DebugLevel = DebugLevel.WARNING,
                    trace_checks: bool = False,
                    trace_cache: bool = False,
                    trace_steps: bool = False,
                    performance_monitoring: bool = False):
    """Configure global debug settings"""
    set_debug_level(level)
    _debug_context.trace_checks = trace_checks
    _debug_context.trace_cache = trace_cache
    _debug_context.trace_steps = trace_steps
    _debug_context.performance_monitoring = performance_monitoring
