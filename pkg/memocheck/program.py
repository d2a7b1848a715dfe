"""
Memocheck Program Model

This module provides clauses with normalized heads, predicate definitions
with their assertions and regtype declarations, first-argument indexing,
and source / YAML export of whole programs.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import yaml

from .assertions import PredAssertion
from .errors import DefinitionError
from .terms import Atom, Struct, Term, TermFactory, Var, format_term

PredKey = Tuple[str, int]


def _count_vars(terms, counts: Counter) -> None:
    stack = list(terms)
    while stack:
        t = stack.pop()
        if type(t) is Var:
            counts[t.node_id] += 1
        elif type(t) is Struct:
            stack.extend(t.args)


@dataclass
class Clause:
    """A clause whose head arguments are distinct variables."""
    head: Term
    body: Tuple[Term, ...] = ()
    line: int = 0
    index_key: Optional[tuple] = field(default=None, init=False)

    def __post_init__(self):
        pattern, _ = self.pattern()
        if pattern.args:
            first = pattern.args[0]
            self.index_key = None if type(first) is Var else first.key

    @property
    def key(self) -> PredKey:
        return (self.head.name, len(self.head.args))

    def pattern(self) -> Tuple[Term, Tuple[Term, ...]]:
        """Fold the leading head equations back into the head.

        Only a prefix of `V = T` goals is folded, in head-argument order, and
        only when V occurs nowhere else in the body.
        """
        if type(self.head) is not Struct:
            return self.head, self.body
        positions = {v.node_id: i for i, v in enumerate(self.head.args)}
        counts: Counter = Counter()
        _count_vars(self.body, counts)
        args = list(self.head.args)
        last = -1
        folded = 0
        for goal in self.body:
            if type(goal) is not Struct or goal.key != ("=", 2):
                break
            lhs = goal.args[0]
            if type(lhs) is not Var or lhs.node_id not in positions:
                break
            pos = positions[lhs.node_id]
            if pos <= last or counts[lhs.node_id] != 1:
                break
            args[pos] = goal.args[1]
            last = pos
            folded += 1
        if not folded:
            return self.head, self.body
        return Struct(self.head.node_id, self.head.functor, tuple(args)), self.body[folded:]

    def to_source(self) -> str:
        head, body = self.pattern()
        text = format_term(head, max_prec=999)
        if body:
            text += " :- " + ", ".join(format_term(g, max_prec=999) for g in body)
        return text + "."


def normalize_clause(head: Term, body: Tuple[Term, ...], make: TermFactory, line: int = 0) -> Clause:
    """Replace non-variable and repeated head arguments by fresh variables.

    `p(1, X, X)` becomes `p(A, X, B) :- A = 1, B = X`.
    """
    if type(head) is Atom:
        return Clause(head, tuple(body), line)
    if type(head) is not Struct:
        raise DefinitionError(f"clause head must be callable: {format_term(head)}", details={"line": line})
    seen = set()
    args = []
    equations = []
    for arg in head.args:
        if type(arg) is Var and arg.node_id not in seen:
            seen.add(arg.node_id)
            args.append(arg)
            continue
        fresh = make.var()
        args.append(fresh)
        equations.append(make.struct("=", (fresh, arg)))
    new_head = make.struct(head.functor, args)
    return Clause(new_head, tuple(equations) + tuple(body), line)


@dataclass
class Predicate:
    name: str
    arity: int
    clauses: List[Clause] = field(default_factory=list)
    assertions: List[PredAssertion] = field(default_factory=list)
    is_regtype: bool = False
    line: int = 0
    _index: Optional[Dict[tuple, Tuple[Clause, ...]]] = field(default=None, init=False, repr=False)

    @property
    def key(self) -> PredKey:
        return (self.name, self.arity)

    def add_clause(self, clause: Clause) -> None:
        self.clauses.append(clause)
        self._index = None

    def candidates(self, first_key: Optional[tuple]) -> Tuple[Clause, ...]:
        """Clauses that can match a call whose first argument has `first_key`."""
        if first_key is None or self.arity == 0:
            return tuple(self.clauses)
        if self._index is None:
            self._index = {}
        found = self._index.get(first_key)
        if found is None:
            found = tuple(c for c in self.clauses if c.index_key is None or c.index_key == first_key)
            self._index[first_key] = found
        return found

    def to_source(self) -> List[str]:
        lines = []
        if self.is_regtype:
            lines.append(f":- regtype {format_term(Atom(0, self.name))}/{self.arity}.")
        lines.extend(a.to_source() for a in self.assertions)
        lines.extend(c.to_source() for c in self.clauses)
        return lines

    def export(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "arity": self.arity,
            "regtype": self.is_regtype,
            "clauses": len(self.clauses),
            "assertions": [a.to_source() for a in self.assertions],
        }


class Program:
    """Predicates in order of first appearance. Immutable once parsed."""

    def __init__(self):
        self.predicates: Dict[PredKey, Predicate] = {}

    def predicate(self, name: str, arity: int, line: int = 0) -> Predicate:
        pred = self.predicates.get((name, arity))
        if pred is None:
            pred = Predicate(name, arity, line=line)
            self.predicates[(name, arity)] = pred
        return pred

    def lookup(self, key: PredKey) -> Optional[Predicate]:
        return self.predicates.get(key)

    def add_clause(self, clause: Clause) -> None:
        self.predicate(*clause.key, line=clause.line).add_clause(clause)

    def add_assertion(self, assertion: PredAssertion) -> None:
        self.predicate(*assertion.key, line=assertion.line).assertions.append(assertion)

    def declare_regtype(self, name: str, arity: int, line: int = 0) -> None:
        if arity < 1:
            raise DefinitionError(f"regtype {name}/{arity} needs a subject argument", details={"line": line})
        self.predicate(name, arity, line=line).is_regtype = True

    @property
    def regtypes(self) -> List[PredKey]:
        return [k for k, p in self.predicates.items() if p.is_regtype]

    def __contains__(self, key: PredKey) -> bool:
        return key in self.predicates

    def __iter__(self) -> Iterator[Predicate]:
        return iter(self.predicates.values())

    def __len__(self) -> int:
        return len(self.predicates)

    def assertion_count(self) -> int:
        return sum(len(p.assertions) for p in self)

    def strip_assertions(self) -> "Program":
        """Same clauses and regtypes, no `pred` assertions."""
        stripped = Program()
        for pred in self:
            copy = stripped.predicate(pred.name, pred.arity, pred.line)
            copy.is_regtype = pred.is_regtype
            for clause in pred.clauses:
                copy.add_clause(clause)
        return stripped

    def to_source(self) -> str:
        blocks = ["\n".join(p.to_source()) for p in self if p.clauses or p.assertions or p.is_regtype]
        return "\n\n".join(blocks) + ("\n" if blocks else "")

    def export(self) -> Dict[str, Any]:
        return {
            "predicates": [p.export() for p in self],
            "regtypes": [f"{n}/{a}" for n, a in self.regtypes],
            "assertions": self.assertion_count(),
        }

    def dump_yaml(self) -> str:
        return yaml.dump(self.export(), indent=2, sort_keys=False)

    def __str__(self) -> str:
        return self.to_source()
