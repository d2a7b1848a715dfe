import random

import pytest
from hypothesis import given, strategies as st

from memocheck.errors import EvaluationError, InternalError
from memocheck.parser import parse_term
from memocheck.terms import (
    INT_MAX,
    INT_MIN,
    Atom,
    BindingStore,
    Int,
    ResetEvent,
    Struct,
    UndoEvent,
    TermFactory,
    Var,
    copy_term,
    format_term,
    is_ground,
    list_items,
    term_vars,
    to_python,
    unify,
    variant,
)
from tests.shared.helpers import random_term


def _shared_var_signature(make):
    """Leaves drawing from three shared variables, so random terms alias."""
    pool = [make.var(name) for name in ("X", "Y", "Z")]
    leaves = (lambda m: m.atom("a"), lambda m: m.integer(1), lambda m: m.atom("[]"),
              lambda m: pool[0], lambda m: pool[1], lambda m: pool[2])
    return leaves, (("f", 2), ("g", 1), (".", 2))


class TestTermFactory:
    def test_node_ids_are_unique_and_increasing(self, make):
        a = make.atom("a")
        x = make.var("X")
        s = make.struct("f", [a, x])
        assert a.node_id < x.node_id < s.node_id

    def test_struct_without_args_is_an_atom(self, make):
        assert type(make.struct("nil", [])) is Atom

    def test_list_of_builds_dotted_pairs(self, make):
        lst = make.list_of([make.integer(1), make.integer(2)])
        assert lst.key == (".", 2)
        assert format_term(lst) == "[1, 2]"

    def test_integer_range_is_checked(self, make):
        assert make.integer(INT_MAX).value == INT_MAX
        assert make.integer(INT_MIN).value == INT_MIN
        with pytest.raises(EvaluationError):
            make.integer(INT_MAX + 1)

    def test_from_python(self, make):
        term = make.from_python([1, "a", 2.5, [3]])
        assert format_term(term) == "[1, a, 2.5, [3]]"
        assert to_python(term) == [1, "a", 2.5, [3]]
        with pytest.raises(TypeError):
            make.from_python(True)


class TestUnify:
    def test_binds_younger_variable_to_older(self, make, store):
        old = make.var("X")
        young = make.var("Y")
        assert unify(young, old, store)
        assert store.is_bound(young)
        assert not store.is_bound(old)

    def test_structures_unify_argumentwise(self, make, store):
        t1, names = parse_term("f(X, g(Y), 3)", make)
        t2, _ = parse_term("f(1, g(a), Z)", make)
        assert unify(t1, t2, store)
        assert format_term(names["X"], store) == "1"
        assert format_term(names["Y"], store) == "a"

    def test_failure_leaves_store_untouched(self, make, store):
        t1, _ = parse_term("f(X, Y, a)", make)
        t2, _ = parse_term("f(1, 2, b)", make)
        assert not unify(t1, t2, store)
        assert len(store) == 0
        assert store.trail_length() == 0

    def test_occurs_check(self, make):
        store = BindingStore(make, occurs_check=True)
        x = make.var("X")
        assert not unify(x, make.struct("f", [x]), store)
        assert unify(x, make.struct("f", [make.var()]), store)

    def test_int_and_float_do_not_unify(self, make, store):
        assert not unify(make.integer(1), make.flt(1.0), store)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_unify_is_symmetric(self, seed):
        rng = random.Random(seed)
        make = TermFactory()
        leaves, constructors = _shared_var_signature(make)
        t1 = random_term(rng, make, 6, leaves, constructors, noise=0)
        t2 = random_term(rng, make, 6, leaves, constructors, noise=0)
        forward = BindingStore(make, occurs_check=True)
        backward = BindingStore(make, occurs_check=True)
        ok = unify(t1, t2, forward)
        assert unify(t2, t1, backward) is ok
        if not ok:
            assert len(forward) == len(backward) == 0
            return
        assert variant(t1, t2, forward)
        assert variant(t1, t2, backward)
        assert variant(copy_term(t1, make, store=forward), copy_term(t1, make, store=backward))


class TestBindingStore:
    def test_undo_to_epoch_restores_bindings_and_fires_event(self, make, store):
        events = []
        store.subscribe(events.append)
        x = make.var("X")
        epoch = store.mark()
        y = make.var("Y")
        unify(x, make.integer(1), store)
        unify(y, make.integer(2), store)
        store.undo_to_epoch(epoch)
        assert not store.is_bound(x)
        assert not store.is_bound(y)
        assert len(events) == 1
        event = events[0]
        assert isinstance(event, UndoEvent)
        assert event.unbound == {x.node_id, y.node_id}
        assert event.conditional == {x.node_id}

    def test_undo_without_bindings_fires_nothing(self, store):
        events = []
        store.subscribe(events.append)
        store.undo_to_epoch(store.mark())
        assert events == []

    def test_epoch_survives_undo_but_newer_ones_do_not(self, make, store):
        outer = store.mark()
        inner = store.mark()
        store.undo_to_epoch(outer)
        store.undo_to_epoch(outer)
        with pytest.raises(InternalError):
            store.undo_to_epoch(inner)

    def test_release_forgets_epoch(self, store):
        epoch = store.mark()
        store.release(epoch)
        with pytest.raises(InternalError):
            store.undo_to_epoch(epoch)

    def test_rebinding_is_an_internal_error(self, make, store):
        x = make.var()
        store.bind(x, make.integer(1))
        with pytest.raises(InternalError):
            store.bind(x, make.integer(2))

    def test_reset_fires_reset_event(self, make, store):
        events = []
        store.subscribe(events.append)
        unify(make.var(), make.atom("a"), store)
        store.reset()
        assert len(store) == 0
        assert isinstance(events[-1], ResetEvent)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_undo_restores_the_store_at_the_epoch(self, seed):
        rng = random.Random(seed)
        make = TermFactory()
        leaves, constructors = _shared_var_signature(make)
        store = BindingStore(make, occurs_check=True)
        terms = [random_term(rng, make, 4, leaves, constructors, noise=0) for _ in range(6)]
        saved = []
        for _ in range(40):
            roll = rng.random()
            if roll < 0.25:
                saved.append((store.mark(), store.bindings, store.trail_length()))
            elif roll < 0.8:
                fresh = random_term(rng, make, 3, leaves, constructors, noise=0)
                unify(rng.choice(terms), fresh, store)
            elif saved:
                del saved[rng.randrange(len(saved)) + 1:]
                epoch, bindings, trail_length = saved[-1]
                store.undo_to_epoch(epoch)
                assert store.bindings == bindings
                assert store.trail_length() == trail_length
        while saved:
            epoch, bindings, trail_length = saved.pop()
            store.undo_to_epoch(epoch)
            assert store.bindings == bindings
            assert store.trail_length() == trail_length


class TestTraversals:
    def test_copy_term_renames_variables_consistently(self, make, store):
        term, _ = parse_term("f(X, Y, X)", make)
        copy = copy_term(term, make)
        assert variant(term, copy)
        assert copy.args[0] is copy.args[2]
        assert copy.args[0].node_id != term.args[0].node_id

    def test_copy_term_dereferences_with_store(self, make, store):
        term, names = parse_term("f(X)", make)
        unify(names["X"], make.integer(7), store)
        copy = copy_term(term, make, store=store)
        assert type(copy.args[0]) is Int

    def test_copy_handles_deep_terms(self, make):
        deep = make.list_of(make.integer(i) for i in range(20000))
        copy = copy_term(deep, make)
        items, tail = list_items(copy)
        assert len(items) == 20000
        assert tail.name == "[]"

    def test_is_ground_and_term_vars(self, make, store):
        term, names = parse_term("g(X, h(Y, X), 1)", make)
        assert not is_ground(term, store)
        assert [v.name for v in term_vars(term, store)] == ["X", "Y"]
        unify(names["X"], make.atom("a"), store)
        unify(names["Y"], make.atom("b"), store)
        assert is_ground(term, store)

    def test_variant(self, make):
        a, _ = parse_term("f(X, Y, X)", make)
        b, _ = parse_term("f(A, B, A)", make)
        c, _ = parse_term("f(A, B, B)", make)
        assert variant(a, b)
        assert not variant(a, c)

    def test_partial_list_tail(self, make):
        term, names = parse_term("[1, 2|T]", make)
        items, tail = list_items(term)
        assert len(items) == 2
        assert tail is names["T"]


class TestFormat:
    @pytest.mark.parametrize("text,expected", [
        ("f(a, 'B c', [])", "f(a, 'B c', [])"),
        ("X = 1 + 2 * 3", "X = 1 + 2 * 3"),
        ("(1 + 2) * 3", "(1 + 2) * 3"),
        ("[a, b|T]", "[a, b|T]"),
        ("-1", "-1"),
        ("- 1", "-(1)"),
        ("-(1)", "-(1)"),
        ("- X", "-X"),
        ("\\+ p", "\\+ p"),
        ("(a , b)", "a, b"),
        ("f((a, b))", "f((a, b))"),
        ("2.0", "2.0"),
    ])
    def test_round_trip_text(self, make, text, expected):
        term, _ = parse_term(text, make)
        assert format_term(term) == expected

    def test_unnamed_variables_print_with_node_id(self, make):
        v = make.var()
        assert format_term(v) == f"_G{v.node_id}"

    def test_names_override(self, make):
        v = make.var("X")
        assert format_term(make.struct("f", [v]), names={v.node_id: "_A"}) == "f(_A)"

    def test_struct_name_property(self, make):
        s = make.struct("f", [make.integer(1)])
        assert isinstance(s, Struct)
        assert s.name == "f"
        assert isinstance(make.var(), Var)
