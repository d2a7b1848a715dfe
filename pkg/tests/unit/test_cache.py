import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from memocheck.automata import INT, TypeTable, instantiate_parametric
from memocheck.cache import (
    CacheConfig,
    CachePolicy,
    DirectMappedCache,
    InvalidationMode,
    LruCache,
    NullCache,
    cache_update_semantics_check,
    make_cache,
    parse_depth_limit,
)
from memocheck.errors import CacheAuditError, ConfigurationError
from memocheck.parser import parse_program, parse_term
from memocheck.terms import BindingStore, ResetEvent, UndoEvent
from tests.shared.helpers import LruModel


def lru(capacity=4, depth_limit=2, invalidation=InvalidationMode.FLUSH_ALL):
    return make_cache(CacheConfig(policy=CachePolicy.LRU, capacity=capacity,
                                  depth_limit=depth_limit, invalidation=invalidation))


def dm(capacity=4, depth_limit=2):
    return make_cache(CacheConfig(policy=CachePolicy.DIRECT_MAPPED, capacity=capacity,
                                  depth_limit=depth_limit))


class TestCacheConfig:
    def test_defaults_and_label(self):
        config = CacheConfig()
        assert config.policy is CachePolicy.LRU
        assert config.label == "lru-256/d2"
        assert CacheConfig(policy="none").label == "none"
        assert CacheConfig(policy="direct-mapped", capacity=8, depth_limit="inf").label == "dm-8/dinf"

    @pytest.mark.parametrize("value,expected", [
        (None, None), ("inf", None), ("INF", None), ("3", 3), (1, 1),
    ])
    def test_parse_depth_limit(self, value, expected):
        assert parse_depth_limit(value) == expected

    @pytest.mark.parametrize("value", [0, -1, "zero", True, 1.5])
    def test_bad_depth_limit(self, value):
        with pytest.raises(ConfigurationError):
            parse_depth_limit(value)
        with pytest.raises(ValidationError):
            CacheConfig(depth_limit=value)

    def test_negative_capacity(self):
        with pytest.raises(ValidationError):
            CacheConfig(capacity=-1)

    def test_admits(self):
        assert CacheConfig(depth_limit=2).admits(1)
        assert not CacheConfig(depth_limit=2).admits(2)
        assert CacheConfig(depth_limit=None).admits(10_000)

    def test_make_cache_dispatch(self):
        assert isinstance(lru(), LruCache)
        assert isinstance(dm(), DirectMappedCache)
        assert isinstance(make_cache(CacheConfig(policy=CachePolicy.NONE)), NullCache)


class TestLru:
    @given(st.lists(st.tuples(st.booleans(), st.integers(0, 9), st.integers(1, 2)), max_size=80),
           st.integers(0, 5))
    def test_matches_reference_model(self, ops, capacity):
        cache = lru(capacity)
        model = LruModel(capacity)
        for is_insert, node, type_id in ops:
            key = (node, type_id)
            if is_insert:
                assert cache.insert(node, type_id) == model.insert(key)
            else:
                assert cache.lookup(node, type_id) == model.lookup(key)
            assert cache.entries() == model.order
        assert len(cache) == len(model.order) <= capacity

    def test_eviction_order(self):
        cache = lru(2)
        cache.insert(1, INT)
        cache.insert(2, INT)
        assert cache.lookup(1, INT)
        cache.insert(3, INT)
        assert cache.entries() == [(1, INT), (3, INT)]
        assert cache.stats.evictions == 1
        assert cache.stats.insertions == 3
        assert cache.stats.lookups == 1 and cache.stats.hits == 1

    def test_depth_gating(self):
        cache = lru(depth_limit=2)
        assert cache.insert(1, INT, depth=1)
        assert not cache.insert(2, INT, depth=2)
        assert (2, INT) not in cache
        unlimited = lru(depth_limit=None)
        assert unlimited.insert(2, INT, depth=500)


class TestDirectMapped:
    def test_slot_is_node_id_modulo_capacity(self):
        cache = dm(4)
        assert cache.slot_of(13) == 1
        cache.insert(13, INT)
        assert cache.slots[1][0] == (13, INT)

    def test_collision_overwrites(self):
        cache = dm(4)
        cache.insert(1, INT)
        cache.insert(5, INT)
        assert not cache.lookup(1, INT)
        assert cache.lookup(5, INT)
        assert cache.stats.evictions == 1
        assert len(cache) == 1

    def test_same_node_different_type_collides(self):
        cache = dm(4)
        cache.insert(2, 1)
        cache.insert(2, 6)
        assert cache.entries() == [(2, 6)]

    def test_zero_capacity(self):
        cache = dm(0)
        assert not cache.insert(1, INT)
        assert not cache.lookup(1, INT)


class TestNullCache:
    def test_never_stores(self):
        cache = make_cache(CacheConfig(policy=CachePolicy.NONE))
        assert not cache.insert(1, INT)
        assert not cache.lookup(1, INT)
        assert len(cache) == 0
        assert cache.stats.lookups == 1


class TestInvalidation:
    def test_reset_clears(self):
        cache = lru()
        cache.insert(1, INT)
        assert cache.invalidate(ResetEvent()) == 1
        assert len(cache) == 0

    def test_flush_mode_conditional_undo_flushes(self):
        cache = lru()
        cache.insert(1, INT)
        cache.insert(50, INT)
        assert cache.invalidate(UndoEvent(frozenset({3}), watermark=10)) == 2
        assert len(cache) == 0
        assert cache.stats.flushes == 1

    def test_flush_mode_flushes_on_any_undo(self):
        cache = lru()
        cache.insert(1, INT)
        cache.insert(50, INT)
        assert cache.invalidate(UndoEvent(frozenset({12}), watermark=10)) == 2
        assert cache.entries() == []
        assert cache.invalidate(UndoEvent(frozenset({13}), watermark=10)) == 0
        assert cache.stats.flushes == 2

    def test_flush_mode_drops_old_nodes_after_binding_a_new_variable(self, make):
        cache = lru()
        store = BindingStore(make)
        store.subscribe(cache.invalidate)
        old = make.integer(7)
        cache.insert(old.node_id, INT, term=old)
        epoch = store.mark()
        fresh = make.var("X")
        store.bind(fresh, make.atom("a"))
        store.undo_to_epoch(epoch)
        assert cache.entries() == []
        assert cache.stats.flushes == 1

    def test_null_cache_counts_no_flushes(self):
        cache = make_cache(CacheConfig(policy=CachePolicy.NONE, capacity=0))
        cache.invalidate(UndoEvent(frozenset({3}), watermark=10))
        assert cache.stats.flushes == 0

    def test_trail_mode_drops_dependents_only(self):
        cache = lru(invalidation=InvalidationMode.TRAIL_SELECTIVE)
        # var 3 under struct 4 under struct 5; struct 7 is independent
        cache.link(3, 4)
        cache.link(4, 5)
        for node in (4, 5, 7):
            cache.insert(node, INT)
        assert cache.invalidate(UndoEvent(frozenset({3}), watermark=100)) == 2
        assert cache.entries() == [(7, INT)]

    def test_trail_links_stay_bounded(self):
        cache = lru(capacity=2, invalidation=InvalidationMode.TRAIL_SELECTIVE)
        for node in range(1000, 3000, 2):
            cache.link(node, node + 1)
            cache.insert(node + 1, INT)
            cache.compact_links()
        assert len(cache) == 2
        assert cache.link_count <= 4 * 2 + 64 + 1

    def test_pruning_keeps_chains_to_resident_entries(self):
        cache = lru(capacity=2, invalidation=InvalidationMode.TRAIL_SELECTIVE)
        # var 3 under struct 4 under struct 5; only 5 stays resident
        cache.link(3, 4)
        cache.link(4, 5)
        cache.insert(5, INT)
        for node in range(1000, 1200, 2):
            cache.link(node, node + 1)
        cache.compact_links()
        assert cache.link_count < 100
        assert cache.invalidate(UndoEvent(frozenset({3}), watermark=100)) == 1
        assert cache.entries() == []

    def test_flush_keeps_links_for_parents_inserted_later(self):
        cache = lru(invalidation=InvalidationMode.TRAIL_SELECTIVE)
        cache.link(3, 4)
        cache.flush("chaos")
        cache.insert(4, INT)
        assert cache.invalidate(UndoEvent(frozenset({3}), watermark=100)) == 1

    def test_other_events_are_ignored(self):
        cache = lru()
        cache.insert(1, INT)
        assert cache.invalidate(object()) == 0
        assert len(cache) == 1

    def test_chaos_flushes_before_lookup(self):
        cache = make_cache(CacheConfig(capacity=4), chaos_rate=1.0, chaos_seed=3)
        cache.insert(1, INT)
        assert not cache.lookup(1, INT)
        assert len(cache) == 0


class TestAudits:
    def test_audit_rejects_false_fact(self, make):
        table = TypeTable()
        store = BindingStore(make)
        cache = lru()
        good = make.integer(3)
        bad = make.atom("a")
        cache.insert(good.node_id, INT, term=good)
        cache.audit(store, table)
        cache.insert(bad.node_id, INT, term=bad)
        with pytest.raises(CacheAuditError):
            cache.audit(store, table)

    def test_update_semantics(self, make, tree_types_source):
        table = TypeTable(parse_program(tree_types_source))
        store = BindingStore(make)
        state = instantiate_parametric(table, "list", ["int"]).final
        prop, _ = parse_term("list([1, 2], int)", make)
        subject = prop.args[0]
        tail = subject.args[1]
        outsider = make.list_of([make.integer(9)])

        ok = cache_update_semantics_check(
            [prop], store, [], {(subject.node_id, state): subject, (tail.node_id, state): tail}, table)
        assert ok.ok

        stray = cache_update_semantics_check([prop], store, [], {(outsider.node_id, state): outsider}, table)
        assert not stray.ok
        assert "not reachable" in stray.violations[0]

        wrong = cache_update_semantics_check([prop], store, [], {(subject.node_id, INT): subject}, table)
        assert "does not hold" in wrong.violations[0]

    def test_update_audit_ignores_existing_entries(self, make, tree_types_source):
        table = TypeTable(parse_program(tree_types_source))
        store = BindingStore(make)
        outsider = make.atom("a")
        key = (outsider.node_id, INT)
        audit = cache_update_semantics_check([], store, [key], {key: outsider}, table)
        assert audit.ok
