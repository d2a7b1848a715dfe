"""Program sources, generators and reference models shared by the tests."""

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from memocheck.engine import Engine
from memocheck.terms import Term, TermFactory

MIXED_PROPS_SOURCE = """\
:- pred p(X,Y) : (int(X) , var(Y)) => (int(X), int(Y)).
:- pred p(X,Y) : (int(X) , var(Y)) => (int(X), atm(Y)).
:- pred p(X,Y) : (atm(X) , var(Y)) => (atm(X), atm(Y)).

p(1,42).  p(2,gamma).  p(a,alpha).
"""

TREE_TYPES_SOURCE = """\
:- regtype list/2.
list([], _).
list([X|Xs], T) :- T(X), list(Xs, T).

:- regtype bintree/2.
bintree(void, _).
bintree(tree(L, X, R), T) :- bintree(L, T), T(X), bintree(R, T).

:- regtype color/1.
color(red).
color(black).
"""

APPEND_SOURCE = TREE_TYPES_SOURCE + """
:- pred app(Xs, Ys, Zs) : (list(Xs, int), list(Ys, int)) => list(Zs, int).
app([], Ys, Ys).
app([X|Xs], Ys, [X|Zs]) :- app(Xs, Ys, Zs).
"""


# =============================================================================
# REFERENCE CACHE MODEL
# =============================================================================

class LruModel:
    """Plain-list LRU: least recently used key first."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.order: List[tuple] = []

    def lookup(self, key: tuple) -> bool:
        if key in self.order:
            self.order.remove(key)
            self.order.append(key)
            return True
        return False

    def insert(self, key: tuple) -> bool:
        if self.capacity == 0:
            return False
        if key in self.order:
            self.order.remove(key)
            self.order.append(key)
            return False
        self.order.append(key)
        if len(self.order) > self.capacity:
            self.order.pop(0)
        return True


# =============================================================================
# TERM ENUMERATION
# =============================================================================

Leaf = Callable[[TermFactory], Term]

LIST_LEAVES: Tuple[Leaf, ...] = (lambda m: m.atom("[]"), lambda m: m.integer(1), lambda m: m.var("V"))
LIST_CONSTRUCTORS = ((".", 2),)
TREE_LEAVES: Tuple[Leaf, ...] = (lambda m: m.atom("void"), lambda m: m.integer(1), lambda m: m.var("V"))
TREE_CONSTRUCTORS = (("tree", 3),)


def enumerate_terms(make: TermFactory, depth: int, leaves: Sequence[Leaf],
                    constructors: Sequence[Tuple[str, int]]) -> List[Term]:
    """Every term of at most `depth` levels over the signature; subterms are shared."""
    base = [leaf(make) for leaf in leaves]
    terms = list(base)
    for _ in range(depth - 1):
        built = []
        for name, arity in constructors:
            for args in itertools.product(terms, repeat=arity):
                built.append(make.struct(name, args))
        terms = base + built
    return terms


def random_term(rng: random.Random, make: TermFactory, depth: int, leaves: Sequence[Leaf],
                constructors: Sequence[Tuple[str, int]], pool: Optional[List[Term]] = None,
                noise: float = 0.05) -> Term:
    """A random term; with a pool, earlier subterms are reused so terms share nodes.

    `noise` is the chance of a leaf that no automaton in the tests accepts
    as an element (the atom `zz`).
    """
    if depth <= 1 or rng.random() < 0.2:
        if pool and rng.random() < 0.3:
            return rng.choice(pool)
        if rng.random() < noise:
            return make.atom("zz")
        return rng.choice(leaves)(make)
    name, arity = rng.choice(constructors)
    args = [random_term(rng, make, depth - 1, leaves, constructors, pool, noise) for _ in range(arity)]
    term = make.struct(name, args)
    if pool is not None:
        pool.append(term)
    return term


# =============================================================================
# RANDOM PROGRAMS
# =============================================================================

PROP_TEMPLATES = (
    "int({0})", "atm({0})", "var({0})", "ground({0})", "term({0})", "num({0})",
    "list({0}, int)", "list({0}, term)", "bintree({0}, int)", "bintree({0}, atm)",
    "list({0}, bintree(int))", "color({0})",
)

_ATOMS = ("a", "b", "void", "[]", "red", "black")


@dataclass
class GeneratedProgram:
    source: str
    queries: List[str] = field(default_factory=list)


class ProgramGenerator:
    """Random terminating programs over list/bintree data.

    Predicate p_i only calls p_j with j > i, and every output variable is
    fresh at the call, so derivations are finite and no term is cyclic.
    """

    def __init__(self, rng: random.Random, max_predicates: int = 5, max_assertions: int = 4,
                 term_depth: int = 3):
        self.rng = rng
        self.max_predicates = max_predicates
        self.max_assertions = max_assertions
        self.term_depth = term_depth

    def term(self, depth: int, names: Sequence[str]) -> str:
        rng = self.rng
        if depth <= 1 or rng.random() < 0.3:
            roll = rng.random()
            if names and roll < 0.45:
                return rng.choice(names)
            if roll < 0.7:
                return str(rng.randint(0, 3))
            return rng.choice(_ATOMS)
        shape = rng.randrange(4)
        if shape == 0:
            return f"f({self.term(depth - 1, names)})"
        if shape == 1:
            return f"g({self.term(depth - 1, names)}, {self.term(depth - 1, names)})"
        if shape == 2:
            return f"[{self.term(depth - 1, names)}|{self.term(depth - 1, names)}]"
        parts = ", ".join(self.term(depth - 1, names) for _ in range(3))
        return f"tree({parts})"

    def pattern(self, depth: int, fresh: List[str]) -> str:
        rng = self.rng
        if depth <= 1 or rng.random() < 0.35:
            if rng.random() < 0.6:
                name = f"V{len(fresh)}"
                fresh.append(name)
                return name
            return rng.choice(("0", "1", "a", "void", "[]"))
        shape = rng.randrange(3)
        if shape == 0:
            return f"[{self.pattern(depth - 1, fresh)}|{self.pattern(depth - 1, fresh)}]"
        if shape == 1:
            return f"tree({self.pattern(depth - 1, fresh)}, {self.pattern(depth - 1, fresh)}, " \
                   f"{self.pattern(depth - 1, fresh)})"
        return f"f({self.pattern(depth - 1, fresh)})"

    def formula(self, subjects: Sequence[str]) -> str:
        rng = self.rng
        disjuncts = []
        for _ in range(1 if rng.random() < 0.75 else 2):
            literals = [rng.choice(PROP_TEMPLATES).format(rng.choice(subjects))
                        for _ in range(rng.randint(1, 2))]
            disjuncts.append("(" + ", ".join(literals) + ")")
        return " ; ".join(disjuncts)

    def assertion(self, name: str) -> str:
        rng = self.rng
        text = f":- pred {name}(A, B)"
        roll = rng.random()
        if roll < 0.8:
            text += " : " + self.formula(("A", "B"))
        if roll >= 0.5 or roll < 0.1:
            text += " => " + self.formula(("A", "B"))
        return text + "."

    def clause(self, index: int, count: int) -> str:
        rng = self.rng
        fresh: List[str] = []
        head_arg = "A" if rng.random() < 0.3 else self.pattern(self.term_depth, fresh)
        names = fresh or (["A"] if head_arg == "A" else [])
        goals = []
        if names and rng.random() < 0.3:
            goals.append(f"{rng.choice(('int', 'atm', 'var', 'ground'))}({rng.choice(names)})")
        if index < count - 1:
            for k in range(rng.randint(0, 2)):
                callee = f"p{rng.randint(index + 1, count - 1)}"
                arg = self.term(2, names)
                out = f"C{k}"
                kind = rng.random()
                if kind < 0.6:
                    goals.append(f"{callee}({arg}, {out})")
                    names = names + [out]
                elif kind < 0.85:
                    goals.append(f"( {callee}({arg}, {out}) -> true ; {out} = none )")
                    names = names + [out]
                else:
                    goals.append(f"\\+ {callee}({arg}, _)")
        if rng.random() < 0.85:
            goals.append(f"B = {self.term(self.term_depth, names)}")
        head = f"p{index}({head_arg}, B)"
        if not goals:
            return head + "."
        return head + " :- " + ", ".join(goals) + "."

    def program(self) -> GeneratedProgram:
        rng = self.rng
        count = rng.randint(1, self.max_predicates)
        blocks = [TREE_TYPES_SOURCE]
        for i in range(count):
            lines = [self.assertion(f"p{i}") for _ in range(rng.randint(0, self.max_assertions))]
            lines.extend(self.clause(i, count) for _ in range(rng.randint(1, 3)))
            blocks.append("\n".join(lines))
        queries = []
        for _ in range(2):
            target = f"p{rng.randrange(count)}"
            queries.append(f"{target}({self.term(4, ['X'])}, Y)")
        return GeneratedProgram("\n\n".join(blocks) + "\n", queries)


def outcome(engine: Engine, query: str, limit: int = 64) -> List[Tuple[tuple, tuple]]:
    """Answers and error sets in a comparable form."""
    return [(answer.bindings, answer.asr_ids) for answer in engine.solve(query, limit=limit)]


def outcomes(source: str, queries: Iterable[str], **overrides) -> List[List[Tuple[tuple, tuple]]]:
    engine = Engine(source, occurs_check=True, **overrides)
    return [outcome(engine, q) for q in queries]
