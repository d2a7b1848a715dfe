# Core API
from .config import ErrorMode, MemocheckConfig  # noqa: F401
from .engine import Answer, Engine, Violation, clause_level_succeeds, solve  # noqa: F401
from .parser import parse_program, parse_term  # noqa: F401
from .program import Program  # noqa: F401
from .transform import CompiledProgram, transform_program  # noqa: F401

# Terms and cache
from .terms import BindingStore, TermFactory, format_term, unify  # noqa: F401
from .cache import CacheConfig, CachePolicy, InvalidationMode, make_cache  # noqa: F401
from .automata import TypeTable  # noqa: F401

# Errors and debugging
from .errors import (  # noqa: F401
    BenchmarkBugError,
    CacheAuditError,
    CheckedError,
    ConfigurationError,
    DebugLevel,
    DefinitionError,
    EvaluationError,
    InstantiationDepthError,
    InternalError,
    MemocheckError,
    ParseError,
    configure_debug,
)
from .performance import get_performance_metrics, reset_performance_metrics  # noqa: F401

__all__ = [
    "Engine",
    "Answer",
    "Violation",
    "solve",
    "clause_level_succeeds",
    "MemocheckConfig",
    "ErrorMode",
    "parse_program",
    "parse_term",
    "Program",
    "CompiledProgram",
    "transform_program",
    "BindingStore",
    "TermFactory",
    "format_term",
    "unify",
    "CacheConfig",
    "CachePolicy",
    "InvalidationMode",
    "make_cache",
    "TypeTable",
    "MemocheckError",
    "ParseError",
    "DefinitionError",
    "InstantiationDepthError",
    "InternalError",
    "CacheAuditError",
    "EvaluationError",
    "CheckedError",
    "BenchmarkBugError",
    "ConfigurationError",
    "DebugLevel",
    "configure_debug",
    "get_performance_metrics",
    "reset_performance_metrics",
]
