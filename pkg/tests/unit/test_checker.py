import random

import pytest
from hypothesis import given, strategies as st

from memocheck.assertions import PropClass
from memocheck.automata import TypeTable, instantiate_parametric
from memocheck.cache import CacheConfig, InvalidationMode, make_cache
from memocheck.checker import PropChecker
from memocheck.errors import CacheAuditError, DefinitionError
from memocheck.parser import parse_program, parse_term
from memocheck.terms import BindingStore, TermFactory, term_vars, unify
from tests.shared.helpers import (
    LIST_CONSTRUCTORS,
    LIST_LEAVES,
    TREE_CONSTRUCTORS,
    TREE_LEAVES,
    TREE_TYPES_SOURCE,
    random_term,
)

CACHEABLE_PROPS = [
    "list(S, int)", "list(S, term)", "list(S, atm)", "list(S, bintree(int))",
    "bintree(S, int)", "bintree(S, term)", "color(S)", "ground(S)",
]
MIXED_LEAVES = LIST_LEAVES + TREE_LEAVES[:1] + (lambda m: m.atom("red"),)
MIXED_CONSTRUCTORS = LIST_CONSTRUCTORS + TREE_CONSTRUCTORS


class TestPropChecker:
    def setup_method(self):
        self.table = TypeTable(parse_program(TREE_TYPES_SOURCE))
        self.list_int = instantiate_parametric(self.table, "list", ["int"]).final

    def checker(self, make, depth_limit=2, capacity=64, policy="lru", shadow=False,
                invalidation=InvalidationMode.FLUSH_ALL):
        store = BindingStore(make)
        cache = make_cache(CacheConfig(policy=policy, capacity=capacity, depth_limit=depth_limit,
                                       invalidation=invalidation))
        store.subscribe(cache.invalidate)
        return PropChecker(store, self.table, cache, shadow=shadow)

    def test_uncached_visits_every_node(self, make):
        checker = self.checker(make, policy="none")
        term, _ = parse_term("[1, 2, 3]", make)
        assert checker.reg_check(term, self.list_int)
        assert checker.stats.node_visits == 7
        assert checker.reg_check(term, self.list_int)
        assert checker.stats.node_visits == 14
        assert checker.stats.max_check_depth == 3

    def test_second_check_hits_at_the_root(self, make):
        checker = self.checker(make)
        term, _ = parse_term("[1, 2, 3]", make)
        assert checker.reg_check(term, self.list_int)
        before = checker.stats.node_visits
        assert checker.reg_check(term, self.list_int)
        assert checker.stats.node_visits - before == 1
        assert checker.stats.hits == 1

    def test_depth_limit_bounds_insertions(self, make):
        checker = self.checker(make, depth_limit=2)
        term, _ = parse_term("[1, 2, 3]", make)
        checker.reg_check(term, self.list_int)
        assert len(checker.cache) == 2
        unlimited = self.checker(make, depth_limit=None)
        unlimited.reg_check(term, self.list_int)
        assert len(unlimited.cache) == 3

    def test_consing_onto_checked_list_is_constant(self, make):
        checker = self.checker(make)
        lst, _ = parse_term("[]", make)
        costs = []
        for i in range(20):
            lst = make.struct(".", [make.integer(i), lst])
            before = checker.stats.node_visits
            assert checker.reg_check(lst, self.list_int)
            costs.append(checker.stats.node_visits - before)
        assert costs[0] == 3
        assert set(costs[1:]) == {3}

    def test_failures_are_not_cached(self, make):
        checker = self.checker(make)
        term, _ = parse_term("[1, a]", make)
        assert not checker.reg_check(term, self.list_int)
        assert len(checker.cache) == 0

    def test_atomic_values_are_not_cached(self, make):
        checker = self.checker(make)
        assert checker.reg_check(make.atom("[]"), self.list_int)
        assert len(checker.cache) == 0

    def test_ground_check(self, make):
        checker = self.checker(make)
        term, names = parse_term("f(X, g(a))", make)
        assert not checker.ground_check(term)
        unify(names["X"], make.integer(1), checker.store)
        assert checker.ground_check(term)

    def test_trail_mode_keeps_independent_subterms(self, make):
        checker = self.checker(make, depth_limit=None, invalidation=InvalidationMode.TRAIL_SELECTIVE)
        store = checker.store
        term, names = parse_term("[1|T]", make)
        epoch = store.mark()
        tail, _ = parse_term("[2]", make)
        unify(names["T"], tail, store)
        assert checker.reg_check(term, self.list_int)
        assert len(checker.cache) == 2
        store.undo_to_epoch(epoch)
        assert checker.cache.entries() == [(tail.node_id, self.list_int)]
        assert not checker.reg_check(term, self.list_int)

    def test_flush_mode_drops_everything_on_conditional_undo(self, make):
        checker = self.checker(make, depth_limit=None)
        store = checker.store
        term, names = parse_term("[1|T]", make)
        epoch = store.mark()
        unify(names["T"], parse_term("[2]", make)[0], store)
        checker.reg_check(term, self.list_int)
        store.undo_to_epoch(epoch)
        assert len(checker.cache) == 0

    def test_shadow_check_catches_unsound_entry(self, make):
        checker = self.checker(make, shadow=True)
        term, _ = parse_term("[a]", make)
        checker.cache.insert(term.node_id, self.list_int, 0, term)
        with pytest.raises(CacheAuditError):
            checker.reg_check(term, self.list_int)

    def test_shadow_check_passes_on_sound_cache(self, make):
        checker = self.checker(make, shadow=True)
        term, _ = parse_term("[1, 2]", make)
        assert checker.reg_check(term, self.list_int)
        assert checker.reg_check(term, self.list_int)


class TestPropTerms:
    @pytest.fixture
    def checker(self, make, tree_types_source):
        table = TypeTable(parse_program(tree_types_source))
        return PropChecker(BindingStore(make), table)

    @pytest.mark.parametrize("text,expected", [
        ("var(X)", True),
        ("var(a)", False),
        ("int(3)", True),
        ("num(2.5)", True),
        ("atm(f(a))", False),
        ("term(X)", True),
        ("ground(f(a))", True),
        ("list([1, 2], int)", True),
        ("list([1, X], int)", False),
        ("bintree(tree(void, 1, void), int)", True),
        ("color(red)", True),
        ("color(green)", False),
    ])
    def test_verdicts_agree_with_uncached(self, checker, make, text, expected):
        prop, _ = parse_term(text, make)
        assert checker.succeeds_trivially_cached(prop) is expected
        assert checker.succeeds_trivially(prop) is expected

    def test_compiled_props_are_shared(self, checker, make):
        first = checker.compile_term(parse_term("list(A, int)", make)[0])
        second = checker.compile_term(parse_term("list(B, int)", make)[0])
        assert first is second
        assert first.cls is PropClass.CACHEABLE

    def test_never_class(self, checker, make):
        assert checker.compile_term(parse_term("var(A)", make)[0]).type_id == -2

    @pytest.mark.parametrize("text", ["list(A, T)", "sorted(A)", "a"])
    def test_bad_prop_terms(self, checker, make, text):
        with pytest.raises(DefinitionError):
            checker.compile_term(parse_term(text, make)[0])


class TestMonotonicity:
    """A cacheable verdict that holds keeps holding as variables get bound."""

    table = TypeTable(parse_program(TREE_TYPES_SOURCE))

    def checker(self, make):
        return PropChecker(BindingStore(make, occurs_check=True), self.table)

    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from(CACHEABLE_PROPS))
    def test_cacheable_verdicts_survive_instantiation(self, seed, text):
        rng = random.Random(seed)
        make = TermFactory()
        checker = self.checker(make)
        store = checker.store
        prop, names = parse_term(text, make)
        assert checker.compile_term(prop).cls is PropClass.CACHEABLE
        assert unify(names["S"], random_term(rng, make, 5, MIXED_LEAVES, MIXED_CONSTRUCTORS), store)
        before = checker.succeeds_trivially(prop)
        for var in term_vars(prop, store):
            if rng.random() < 0.6:
                assert unify(var, random_term(rng, make, 3, MIXED_LEAVES, MIXED_CONSTRUCTORS), store)
        if before:
            assert checker.succeeds_trivially(prop)

    def test_var_is_classified_never(self):
        make = TermFactory()
        checker = self.checker(make)
        prop, names = parse_term("var(S)", make)
        assert checker.compile_term(prop).cls is PropClass.NEVER
        assert checker.succeeds_trivially(prop)
        unify(names["S"], make.integer(1), checker.store)
        assert not checker.succeeds_trivially(prop)
