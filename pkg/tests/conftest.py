"""Shared pytest fixtures and configuration for memocheck tests."""

import os

import pytest
from hypothesis import HealthCheck, settings

from memocheck.errors import DebugLevel, configure_debug
from memocheck.performance import reset_performance_metrics
from memocheck.terms import BindingStore, TermFactory

from tests.shared.helpers import MIXED_PROPS_SOURCE, TREE_TYPES_SOURCE

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def reset_debug_context():
    """Every test starts from the default debug settings and empty timings."""
    configure_debug(DebugLevel.WARNING)
    reset_performance_metrics()
    yield
    configure_debug(DebugLevel.WARNING)


@pytest.fixture
def make():
    return TermFactory()


@pytest.fixture
def store(make):
    return BindingStore(make)


@pytest.fixture
def mixed_props_source():
    return MIXED_PROPS_SOURCE


@pytest.fixture
def tree_types_source():
    return TREE_TYPES_SOURCE


def pytest_collection_modifyitems(config, items):
    for item in items:
        fspath = str(getattr(item, "fspath", ""))
        if "/tests/unit/" in fspath:
            item.add_marker(pytest.mark.unit)
        elif "/tests/integration/" in fspath:
            item.add_marker(pytest.mark.integration)
