"""
Memocheck Parser

This module provides the tokenizer and operator-precedence parser for the
clause language: clauses, `:- pred` and `:- regtype` directives, lists,
quoted atoms and `%` comments.
"""

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .assertions import PredAssertion, to_dnf
from .errors import DefinitionError, EvaluationError, ParseError
from .performance import timed
from .program import Program, normalize_clause
from .terms import (
    INFIX_OPS,
    NIL,
    PREFIX_OPS,
    Atom,
    Int,
    Struct,
    Term,
    TermFactory,
    Var,
)

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<float>\d+\.\d+(?:[eE][+-]?\d+)?)
  | (?P<int>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<qatom>'(?:[^'\\]|''|\\.)*')
  | (?P<punct>[()\[\],|])
  | (?P<symbol>[+\-*/\\^<>=~:.?@#&$]+)
  | (?P<solo>[!;])
""", re.VERBOSE)

_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'"}


@dataclass
class Token:
    kind: str          # name, var, int, float, punct, end, eof
    text: str
    line: int
    layout_before: bool = False


def _unquote(text: str, line: int) -> str:
    body = text[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "'" and i + 1 < len(body) and body[i + 1] == "'":
            out.append("'")
            i += 2
        elif ch == "\\" and i + 1 < len(body):
            esc = body[i + 1]
            if esc not in _ESCAPES:
                raise ParseError(f"unknown escape \\{esc}", line)
            out.append(_ESCAPES[esc])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    line = 1
    layout = True
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line)
        kind = match.lastgroup
        value = match.group(kind)
        pos = match.end()
        if kind == "ws":
            line += value.count("\n")
            layout = True
            continue
        if kind == "symbol" and value == "." and (pos >= len(text) or text[pos].isspace() or text[pos] == "%"):
            tokens.append(Token("end", ".", line, layout))
        elif kind == "symbol" and value.endswith(".") and len(value) > 1 and (
                pos >= len(text) or text[pos].isspace() or text[pos] == "%"):
            tokens.append(Token("name", value[:-1], line, layout))
            tokens.append(Token("end", ".", line, False))
        elif kind == "qatom":
            tokens.append(Token("qname", _unquote(value, line), line, layout))
        elif kind in ("symbol", "solo"):
            tokens.append(Token("name", value, line, layout))
        else:
            tokens.append(Token(kind, value, line, layout))
        line += value.count("\n")
        layout = False
    tokens.append(Token("eof", "", line, True))
    return tokens


class _Parser:
    def __init__(self, text: str, make: TermFactory):
        self.tokens = tokenize(text)
        self.pos = 0
        self.make = make
        self.varmap: Dict[str, Var] = {}

    # Token helpers ------------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            wanted = repr(text) if text is not None else kind
            raise ParseError(f"unexpected {self.describe(tok)}", tok.line, expected=wanted)
        return self.advance()

    @staticmethod
    def describe(tok: Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        if tok.kind == "end":
            return "end of clause"
        return repr(tok.text)

    def is_punct(self, tok: Token, text: str) -> bool:
        return tok.kind == "punct" and tok.text == text

    # Terms --------------------------------------------------------------------

    def variable(self, name: str) -> Var:
        if name == "_":
            return self.make.var("_")
        var = self.varmap.get(name)
        if var is None:
            var = self.make.var(name)
            self.varmap[name] = var
        return var

    def number(self, tok: Token, negative: bool = False) -> Term:
        try:
            if tok.kind == "int":
                value = int(tok.text)
                return self.make.integer(-value if negative else value)
            value = float(tok.text)
            return self.make.flt(-value if negative else value)
        except EvaluationError:
            raise ParseError(f"integer literal out of range: {tok.text}", tok.line) from None

    def starts_term(self, tok: Token) -> bool:
        if tok.kind in ("int", "float", "var", "qname"):
            return True
        if tok.kind == "name":
            return tok.text not in INFIX_OPS or tok.text in PREFIX_OPS
        return tok.kind == "punct" and tok.text in ("(", "[")

    def arguments(self) -> List[Term]:
        self.expect("punct", "(")
        args = [self.parse(999)]
        while self.is_punct(self.peek(), ","):
            self.advance()
            args.append(self.parse(999))
        self.expect("punct", ")")
        return args

    def parse_list(self) -> Term:
        self.expect("punct", "[")
        if self.is_punct(self.peek(), "]"):
            self.advance()
            return self.make.atom(NIL)
        items = [self.parse(999)]
        while self.is_punct(self.peek(), ","):
            self.advance()
            items.append(self.parse(999))
        tail = None
        if self.is_punct(self.peek(), "|"):
            self.advance()
            tail = self.parse(999)
        self.expect("punct", "]")
        return self.make.list_of(items, tail)

    def primary(self, max_prec: int) -> Tuple[Term, int]:
        tok = self.peek()
        if tok.kind in ("int", "float"):
            self.advance()
            return self.number(tok), 0
        if tok.kind == "var":
            self.advance()
            var = self.variable(tok.text)
            nxt = self.peek()
            if self.is_punct(nxt, "(") and not nxt.layout_before:
                return self.make.struct("call", [var] + self.arguments()), 0
            return var, 0
        if self.is_punct(tok, "("):
            self.advance()
            term = self.parse(1200)
            self.expect("punct", ")")
            return term, 0
        if self.is_punct(tok, "["):
            return self.parse_list(), 0
        if tok.kind in ("name", "qname"):
            self.advance()
            name = tok.text
            nxt = self.peek()
            if self.is_punct(nxt, "(") and not nxt.layout_before:
                return self.make.struct(name, self.arguments()), 0
            if tok.kind == "name" and name == "-" and nxt.kind in ("int", "float") and not nxt.layout_before:
                self.advance()
                return self.number(nxt, negative=True), 0
            if tok.kind == "name" and name in PREFIX_OPS and self.starts_term(nxt):
                prec, kind = PREFIX_OPS[name]
                if prec > max_prec:
                    prec = 999
                arg_max = prec if kind == "fy" else prec - 1
                arg = self.parse(arg_max)
                return self.make.struct(name, [arg]), prec
            return self.make.atom(name), 0
        raise ParseError(f"unexpected {self.describe(tok)}", tok.line, expected="a term")

    def parse(self, max_prec: int) -> Term:
        left, left_prec = self.primary(max_prec)
        while True:
            tok = self.peek()
            if tok.kind == "name" or (tok.kind == "punct" and tok.text == ","):
                op = tok.text
            else:
                break
            if op not in INFIX_OPS:
                break
            prec, kind = INFIX_OPS[op]
            if prec > max_prec:
                break
            left_max = prec if kind == "yfx" else prec - 1
            if left_prec > left_max:
                break
            right_max = prec if kind == "xfy" else prec - 1
            self.advance()
            right = self.parse(right_max)
            left = self.make.struct(op, [left, right])
            left_prec = prec
        return left

    # Clauses and directives --------------------------------------------------

    def at_end(self) -> bool:
        return self.peek().kind == "eof"

    def directive_pred(self, line: int) -> PredAssertion:
        head = self.parse(999)
        if type(head) not in (Atom, Struct):
            raise ParseError("assertion head must be callable", line)
        pre = post = None
        if self.peek().kind == "name" and self.peek().text == ":":
            self.advance()
            pre = self.parse(1100)
        if self.peek().kind == "name" and self.peek().text == "=>":
            self.advance()
            post = self.parse(1100)
        self.expect("end")
        return PredAssertion(head, to_dnf(pre), None if post is None else to_dnf(post), line,
                             pre_source=pre, post_source=post)

    def directive_regtype(self, line: int) -> Tuple[str, int]:
        spec = self.parse(1200)
        self.expect("end")
        if (type(spec) is Struct and spec.key == ("/", 2) and type(spec.args[0]) is Atom
                and type(spec.args[1]) is Int):
            return spec.args[0].name, spec.args[1].value
        raise ParseError("regtype declaration must be name/arity", line, expected="name/arity")

    def program(self, program: Program) -> Program:
        while not self.at_end():
            self.varmap = {}
            tok = self.peek()
            line = tok.line
            if tok.kind == "name" and tok.text == ":-":
                self.advance()
                kw = self.peek()
                if kw.kind == "name" and kw.text == "pred":
                    self.advance()
                    try:
                        program.add_assertion(self.directive_pred(line))
                    except DefinitionError as exc:
                        raise ParseError(exc.message, line) from None
                    continue
                if kw.kind == "name" and kw.text == "regtype":
                    self.advance()
                    name, arity = self.directive_regtype(line)
                    program.declare_regtype(name, arity, line)
                    continue
                raise ParseError(f"unsupported directive {self.describe(kw)}", line,
                                 expected="'pred' or 'regtype'")
            term = self.parse(1200)
            self.expect("end")
            if type(term) is Struct and term.key == (":-", 2):
                head, body = term.args
                goals = flatten_conjunction(body)
            else:
                head, goals = term, ()
            if type(head) not in (Atom, Struct):
                raise ParseError("clause head must be an atom or compound term", line, expected="callable head")
            if type(head) is Struct and head.functor in (",", ";", "->", ":-"):
                raise ParseError(f"cannot define control construct {head.functor}", line)
            program.add_clause(normalize_clause(head, goals, self.make, line))
        return program


def flatten_conjunction(body: Term) -> Tuple[Term, ...]:
    goals = []
    stack = [body]
    while stack:
        t = stack.pop()
        if type(t) is Struct and t.key == (",", 2):
            stack.append(t.args[1])
            stack.append(t.args[0])
        elif type(t) is Atom and t.name == "true" and not goals and not stack:
            continue
        else:
            goals.append(t)
    return tuple(goals)


@timed("parse")
def parse_program(text: str, make: Optional[TermFactory] = None) -> Program:
    """Parse source text into a Program with normalized heads."""
    return _Parser(text, make or TermFactory()).program(Program())


def parse_term(text: str, make: Optional[TermFactory] = None) -> Tuple[Term, Dict[str, Var]]:
    """Parse one term (a trailing `.` is optional); returns it with its named variables."""
    source = text.strip()
    if not source.endswith("."):
        source += " ."
    elif not source.endswith(" ."):
        source = source[:-1] + " ."
    parser = _Parser(source, make or TermFactory())
    term = parser.parse(1200)
    parser.expect("end")
    if not parser.at_end():
        tok = parser.peek()
        raise ParseError(f"unexpected {parser.describe(tok)}", tok.line, expected="end of input")
    return term, dict(parser.varmap)

