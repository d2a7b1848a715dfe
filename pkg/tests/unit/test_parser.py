import random

import pytest
from hypothesis import given, strategies as st

from memocheck.errors import DefinitionError, ParseError
from memocheck.parser import flatten_conjunction, parse_program, parse_term, tokenize
from memocheck.terms import Struct, TermFactory, format_term, variant
from tests.shared.helpers import random_term

PRINTABLE_LEAVES = (
    lambda m: m.atom("a"), lambda m: m.atom("B c"), lambda m: m.atom("[]"),
    lambda m: m.integer(7), lambda m: m.integer(0), lambda m: m.flt(1.5),
)
PRINTABLE_CONSTRUCTORS = (
    ("f", 2), ("g", 1), ("h i", 1), (".", 2), ("+", 2), ("-", 2), ("*", 2), (",", 2), (";", 2),
)


class TestTokenize:
    def test_kinds(self):
        kinds = [(t.kind, t.text) for t in tokenize("p(X, 'a b', 1.5, 3) :- q.")]
        assert kinds == [
            ("name", "p"), ("punct", "("), ("var", "X"), ("punct", ","), ("qname", "a b"),
            ("punct", ","), ("float", "1.5"), ("punct", ","), ("int", "3"), ("punct", ")"),
            ("name", ":-"), ("name", "q"), ("end", "."), ("eof", ""),
        ]

    def test_comments_and_lines(self):
        tokens = tokenize("% header\na.\n\nb.")
        assert [(t.text, t.line) for t in tokens if t.kind == "name"] == [("a", 2), ("b", 4)]

    def test_quoted_escapes(self):
        tokens = tokenize("'it''s\\n'.")
        assert tokens[0].text == "it's\n"

    def test_bad_character(self):
        with pytest.raises(ParseError) as info:
            tokenize("a.\n`b.")
        assert info.value.line == 2


class TestParseTerm:
    def test_operators_and_precedence(self, make):
        term, names = parse_term("X is 1 + 2 * 3 - 4", make)
        assert term.key == ("is", 2)
        assert format_term(term.args[1]) == "1 + 2 * 3 - 4"
        assert set(names) == {"X"}

    def test_variable_call_becomes_call_n(self, make):
        term, _ = parse_term("T(X, Y)", make)
        assert term.key == ("call", 3)

    def test_if_then_else_shape(self, make):
        term, _ = parse_term("(a -> b ; c)", make)
        assert term.key == (";", 2)
        assert term.args[0].key == ("->", 2)

    def test_anonymous_variables_are_distinct(self, make):
        term, names = parse_term("f(_, _)", make)
        assert term.args[0] is not term.args[1]
        assert names == {}

    def test_trailing_garbage(self, make):
        with pytest.raises(ParseError):
            parse_term("f(a) g", make)

    def test_integer_literal_out_of_range(self, make):
        with pytest.raises(ParseError):
            parse_term("99999999999999999999", make)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_printed_terms_parse_back(self, seed):
        rng = random.Random(seed)
        make = TermFactory()
        x, y = make.var("X"), make.var("Y")
        leaves = PRINTABLE_LEAVES + (lambda m: x, lambda m: y)
        term = random_term(rng, make, 6, leaves, PRINTABLE_CONSTRUCTORS, noise=0)
        text = format_term(term)
        parsed, _ = parse_term(text, make)
        assert variant(term, parsed)
        assert format_term(parsed) == text


class TestParseProgram:
    def test_clauses_assertions_and_regtypes(self, mixed_props_source, tree_types_source):
        program = parse_program(tree_types_source + mixed_props_source)
        assert program.lookup(("p", 2)) is not None
        assert len(program.lookup(("p", 2)).clauses) == 3
        assert len(program.lookup(("p", 2)).assertions) == 3
        assert program.regtypes == [("list", 2), ("bintree", 2), ("color", 1)]

    def test_assertion_without_pre(self):
        program = parse_program(":- pred q(X) => int(X).\nq(1).")
        assertion = program.lookup(("q", 1)).assertions[0]
        assert assertion.pre == ((),)
        assert assertion.post is not None

    def test_assertion_with_disjunctive_pre(self):
        program = parse_program(":- pred q(X) : (int(X) ; atm(X)).\nq(1).")
        assertion = program.lookup(("q", 1)).assertions[0]
        assert [[l.text for l in conj] for conj in assertion.pre] == [["int(X)"], ["atm(X)"]]
        assert assertion.post is None

    def test_body_is_flattened(self):
        program = parse_program("r :- a, (b, c), d.\na. b. c. d.")
        assert [format_term(g) for g in program.lookup(("r", 0)).clauses[0].body] == ["a", "b", "c", "d"]

    def test_head_arguments_are_normalized(self):
        program = parse_program("p(1, X, X).")
        clause = program.lookup(("p", 3)).clauses[0]
        assert all(type(a).__name__ == "Var" for a in clause.head.args)
        assert len(clause.body) == 2
        assert clause.to_source() == "p(1, X, X)."

    def test_missing_end(self):
        with pytest.raises(ParseError) as info:
            parse_program("a :- b\nc.")
        assert info.value.line == 2

    def test_unsupported_directive(self):
        with pytest.raises(ParseError, match="unsupported directive"):
            parse_program(":- module(foo).")

    def test_bad_regtype_declaration(self):
        with pytest.raises(ParseError):
            parse_program(":- regtype list.")
        with pytest.raises(DefinitionError):
            parse_program(":- regtype nothing/0.")

    def test_assertion_on_non_variable_is_reported_with_line(self):
        with pytest.raises(ParseError) as info:
            parse_program("a.\n:- pred q(X) : Y.\n")
        assert info.value.line == 2

    def test_cannot_define_control(self):
        with pytest.raises(ParseError):
            parse_program("(a, b) :- c.")


def test_flatten_conjunction(make):
    body, _ = parse_term("(a, b), (c, true)", make)
    assert [format_term(g) for g in flatten_conjunction(body)] == ["a", "b", "c", "true"]
    assert isinstance(body, Struct)
