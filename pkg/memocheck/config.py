"""
Memocheck Configuration

This module provides the settings object shared by the engine, the CLI and
the benchmark harness.
"""

from enum import Enum
from typing import Optional

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .cache import CacheConfig, CachePolicy, InvalidationMode, parse_depth_limit
from .errors import ConfigurationError, DebugLevel, parse_debug_level


class ErrorMode(str, Enum):
    CONTINUE = "continue"
    ABORT = "abort"


class MemocheckConfig(BaseSettings):
    """
    Run-time checking configuration.

    Values come from keyword arguments first, then `MEMOCHECK_*`
    environment variables, then the defaults below.
    """
    model_config = SettingsConfigDict(env_prefix="MEMOCHECK_", extra="ignore")

    # Checking
    rtchecks: bool = Field(default=True, description="Run assertion wrappers; off means standard semantics")
    on_error: ErrorMode = Field(default=ErrorMode.CONTINUE, description="Record violations or stop at the first")
    strict_calls: bool = Field(default=False, description="Evaluate the calls condition once per clause tried")
    short_circuit: bool = Field(default=False, description="Skip post literals whose guarding preconditions failed")

    # Cache
    cache_policy: CachePolicy = Field(default=CachePolicy.LRU, description="lru, dm or none")
    cache_size: int = Field(default=256, ge=0, description="Cache capacity in entries")
    depth_limit: Optional[int] = Field(default=2, description="Check depth threshold; None means infinite")
    invalidation: InvalidationMode = Field(default=InvalidationMode.FLUSH_ALL,
                                           description="Backtracking invalidation mode")

    # Engine
    occurs_check: bool = Field(default=False, description="Unify with occurs check")
    instantiation_depth_bound: int = Field(default=64, ge=1, description="Nesting bound for regtype instances")
    dispatch_array_limit: int = Field(default=8, ge=0, description="Constructor sets above this size use a dict")

    # Debugging
    debug_audit: bool = Field(default=False, description="Audit every cache entry after each step")
    shadow_check: bool = Field(default=False, description="Compare every cached check with the uncached one")
    chaos_flush_rate: float = Field(default=0.0, ge=0.0, le=1.0, description="Probability of a flush per lookup")
    chaos_seed: int = Field(default=0, description="Seed for chaos flushing")
    debug_level: str = Field(default="WARNING", description="NONE, ERROR, WARNING, INFO, DEBUG or TRACE")

    @field_validator("depth_limit", mode="before")
    @classmethod
    def _depth_limit(cls, value):
        try:
            return parse_depth_limit(value)
        except ConfigurationError as exc:
            raise ValueError(exc.message) from None

    @field_validator("debug_level")
    @classmethod
    def _debug_level(cls, value):
        try:
            return parse_debug_level(value).name
        except ConfigurationError as exc:
            raise ValueError(exc.message) from None

    def cache_config(self) -> CacheConfig:
        return CacheConfig(policy=self.cache_policy, capacity=self.cache_size,
                           depth_limit=self.depth_limit, invalidation=self.invalidation)

    def get_debug_level(self) -> DebugLevel:
        return parse_debug_level(self.debug_level)

    def with_overrides(self, **overrides) -> "MemocheckConfig":
        """A validated copy with some fields replaced; None values are ignored
        except for `depth_limit`."""
        values = self.model_dump()
        for key, value in overrides.items():
            if key not in values:
                raise ConfigurationError(f"unknown configuration field: {key}")
            if value is None and key != "depth_limit":
                continue
            values[key] = value
        try:
            return type(self)(**values)
        except ValidationError as exc:
            raise ConfigurationError(f"invalid configuration: {exc}") from None

    def with_cache(self, cache: CacheConfig) -> "MemocheckConfig":
        return self.with_overrides(cache_policy=cache.policy, cache_size=cache.capacity,
                                   depth_limit=cache.depth_limit, invalidation=cache.invalidation)
