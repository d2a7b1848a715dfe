"""
Memocheck Regular Types

This module provides validation of regular programs and their compilation,
one instance at a time, into deterministic top-down tree automata that share
a single state table per program.
"""

from dataclasses import dataclass, field
from typing import Container, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import DefinitionError, InstantiationDepthError, InternalError
from .program import Predicate, Program
from .terms import Atom, Float, Int, Struct, Term, Var, functor_label, is_ground

# Primitive classes with implicit transitions, then GROUND as a pseudo type.
ANY, INT, FLT, NUM, ATM = 0, 1, 2, 3, 4
GROUND = -1

PRIMITIVE_STATES: Dict[str, int] = {"term": ANY, "any": ANY, "int": INT, "flt": FLT, "num": NUM, "atm": ATM}
PRIMITIVE_NAMES = ("any", "int", "flt", "num", "atm")
FIRST_USER_STATE = len(PRIMITIVE_NAMES)


def primitive_accepts(state: int, term: Term) -> bool:
    """Implicit transitions; `term` must already be dereferenced."""
    if state == ANY:
        return True
    kind = type(term)
    if state == INT:
        return kind is Int
    if state == FLT:
        return kind is Float
    if state == NUM:
        return kind is Int or kind is Float
    if state == ATM:
        return kind is Atom
    raise InternalError(f"state {state} is not primitive")


class ConstructorSet:
    """Transitions into one state, keyed by principal functor.

    Small sets are scanned linearly; larger ones go through a dict.
    """
    __slots__ = ("_items", "_map")

    def __init__(self, transitions: Iterable[Tuple[tuple, Tuple[int, ...]]], array_limit: int = 8):
        self._items = tuple(transitions)
        self._map = dict(self._items) if len(self._items) > array_limit else None

    def get(self, key) -> Optional[Tuple[int, ...]]:
        if self._map is not None:
            return self._map.get(key)
        for k, args in self._items:
            if k == key:
                return args
        return None

    @property
    def uses_map(self) -> bool:
        return self._map is not None

    def keys(self) -> List[tuple]:
        return [k for k, _ in self._items]

    def __iter__(self) -> Iterator[Tuple[tuple, Tuple[int, ...]]]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)


@dataclass(frozen=True)
class PrimitiveClass:
    """The implicit constructors of a primitive state."""
    state: int

    @property
    def name(self) -> str:
        return PRIMITIVE_NAMES[self.state]

    def accepts(self, term: Term) -> bool:
        return primitive_accepts(self.state, term)


# =============================================================================
# REGULAR PROGRAMS
# =============================================================================

@dataclass(frozen=True)
class RegularClause:
    subject: Term
    params: Tuple[Term, ...]
    body: Tuple[Term, ...]
    line: int = 0


@dataclass(frozen=True)
class RegularProgram:
    name: str
    arity: int
    clauses: Tuple[RegularClause, ...]

    @property
    def key(self) -> Tuple[str, int]:
        return (self.name, self.arity)

    @classmethod
    def from_predicate(cls, pred: Predicate) -> "RegularProgram":
        clauses = []
        for clause in pred.clauses:
            head, body = clause.pattern()
            clauses.append(RegularClause(head.args[0], tuple(head.args[1:]), tuple(body), clause.line))
        return cls(pred.name, pred.arity, tuple(clauses))


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def add(self, constraint: str, clause: RegularClause, detail: str = "") -> None:
        text = f"{constraint} (clause at line {clause.line})"
        if detail:
            text += f": {detail}"
        self.violations.append(text)


def _type_expr_ok(expr: Term, params: Container[int]) -> bool:
    stack = [expr]
    while stack:
        t = stack.pop()
        if type(t) is Var:
            if t.node_id not in params:
                return False
        elif type(t) is Struct:
            stack.extend(t.args)
        elif type(t) is not Atom:
            return False
    return True


def validate_regular_program(rp: RegularProgram, regtypes: Container[Tuple[str, int]] = ()) -> ValidationReport:
    """Check linear flat heads, pairwise distinct functors and body shapes."""
    report = ValidationReport()
    seen_keys: Dict[tuple, RegularClause] = {}
    for clause in rp.clauses:
        subject = clause.subject
        fields: Dict[int, Term] = {}
        if type(subject) is Var:
            report.add("head term is a variable", clause)
        elif type(subject) is Struct:
            for arg in subject.args:
                if type(arg) is not Var:
                    report.add("head term is not flat", clause, f"argument {arg!r}")
                elif arg.node_id in fields:
                    report.add("non-linear head", clause, f"variable {arg!r} repeated")
                else:
                    fields[arg.node_id] = arg
        params = {}
        for p in clause.params:
            if type(p) is not Var or p.node_id in params or p.node_id in fields:
                report.add("type parameters must be distinct fresh variables", clause)
                break
            params[p.node_id] = p
        if type(subject) is not Var:
            previous = seen_keys.get(subject.key)
            if previous is not None:
                report.add("heads unify", clause, f"same constructor as clause at line {previous.line}")
            else:
                seen_keys[subject.key] = clause
        constrained = set()
        for goal in clause.body:
            target = None
            if type(goal) is Struct and goal.functor == "call" and len(goal.args) == 2:
                fn, target = goal.args
                if type(fn) is not Var or fn.node_id not in params:
                    report.add("body literal shape", clause, f"{goal!r} must call a type parameter")
                    continue
            elif type(goal) is Struct:
                name, extra = goal.functor, goal.args[1:]
                target = goal.args[0]
                builtin = name in PRIMITIVE_STATES and not extra and name != "any"
                if not builtin and (name, len(goal.args)) not in regtypes:
                    report.add("body literal shape", clause, f"{goal!r} is not a prop or regtype")
                    continue
                if not all(_type_expr_ok(e, params) for e in extra):
                    report.add("body literal shape", clause, f"bad type expression in {goal!r}")
                    continue
            else:
                report.add("body literal shape", clause, f"{goal!r}")
                continue
            if type(target) is not Var or target.node_id not in fields:
                report.add("body literal shape", clause, f"{goal!r} must constrain a head field")
            elif target.node_id in constrained:
                report.add("variable constrained twice", clause, f"{target!r}")
            else:
                constrained.add(target.node_id)
    return report


# =============================================================================
# TYPE TABLE AND AUTOMATA
# =============================================================================

class TypeTable:
    """Dense state ids for every instantiated regtype of one program."""

    def __init__(self, program: Optional[Program] = None, depth_bound: int = 64, array_limit: int = 8):
        self.depth_bound = depth_bound
        self.array_limit = array_limit
        self._programs: Dict[Tuple[str, int], RegularProgram] = {}
        self._names: List[str] = list(PRIMITIVE_NAMES)
        self._constructors: List[Optional[ConstructorSet]] = [None] * FIRST_USER_STATE
        self._memo: Dict[tuple, int] = {}
        if program is not None:
            for key in program.regtypes:
                self._programs[key] = RegularProgram.from_predicate(program.lookup(key))
            for rp in self._programs.values():
                report = validate_regular_program(rp, self._programs)
                if not report:
                    raise DefinitionError(f"regtype {rp.name}/{rp.arity} is not regular: "
                                          + "; ".join(report.violations),
                                          details={"violations": report.violations})

    def register(self, rp: RegularProgram) -> None:
        self._programs[rp.key] = rp

    @property
    def regtypes(self) -> Dict[Tuple[str, int], RegularProgram]:
        return dict(self._programs)

    def __len__(self) -> int:
        return len(self._names)

    def _check_state(self, state: int) -> None:
        if state != GROUND and not 0 <= state < len(self._names):
            raise InternalError(f"unknown automaton state {state}")

    def name(self, state: int) -> str:
        self._check_state(state)
        return "ground" if state == GROUND else self._names[state]

    @staticmethod
    def is_primitive(state: int) -> bool:
        return 0 <= state < FIRST_USER_STATE

    def constructors(self, state: int) -> Union[ConstructorSet, PrimitiveClass]:
        self._check_state(state)
        if state == GROUND:
            raise InternalError("ground has no constructor table")
        if self.is_primitive(state):
            return PrimitiveClass(state)
        return self._constructors[state]

    def constructor_sets(self) -> List[Optional[ConstructorSet]]:
        """Direct per-state access for the checker's inner loop."""
        return self._constructors

    def instantiate(self, name: str, args: Tuple[int, ...] = (), depth: int = 0) -> int:
        arity = len(args) + 1
        key = (name, arity, tuple(args))
        state = self._memo.get(key)
        if state is not None:
            return state
        if depth > self.depth_bound:
            raise InstantiationDepthError(
                f"instantiating {name}/{arity} exceeded depth {self.depth_bound}",
                details={"type": name})
        rp = self._programs.get((name, arity))
        if rp is None:
            raise DefinitionError(f"undeclared regtype {name}/{arity}")
        state = len(self._names)
        label = name if not args else f"{name}({','.join(self._names[a] if a >= 0 else 'ground' for a in args)})"
        self._names.append(label)
        self._constructors.append(None)
        self._memo[key] = state
        try:
            transitions = []
            for clause in rp.clauses:
                env = {p.node_id: a for p, a in zip(clause.params, args)}
                subject = clause.subject
                fields = {v.node_id: ANY for v in subject.args}
                for goal in clause.body:
                    target = goal.args[0] if goal.functor != "call" else goal.args[1]
                    if goal.functor == "call":
                        fields[target.node_id] = env[goal.args[0].node_id]
                    elif goal.functor in PRIMITIVE_STATES and len(goal.args) == 1:
                        fields[target.node_id] = PRIMITIVE_STATES[goal.functor]
                    else:
                        sub = tuple(self.resolve(e, env, depth + 1) for e in goal.args[1:])
                        fields[target.node_id] = self.instantiate(goal.functor, sub, depth + 1)
                transitions.append((subject.key, tuple(fields[v.node_id] for v in subject.args)))
        except Exception:
            self._forget_from(state)
            raise
        self._constructors[state] = ConstructorSet(transitions, self.array_limit)
        return state

    def _forget_from(self, state: int) -> None:
        """Drop `state` and every state allocated after it."""
        del self._names[state:]
        del self._constructors[state:]
        self._memo = {k: s for k, s in self._memo.items() if s < state}

    def resolve(self, expr: Term, env: Optional[Dict[int, int]] = None, depth: int = 0) -> int:
        """State of a type expression such as `int`, `list(int)` or a parameter."""
        if type(expr) is Var:
            if env is None or expr.node_id not in env:
                raise DefinitionError(f"unbound type parameter {expr!r}")
            return env[expr.node_id]
        if type(expr) is Atom:
            if expr.name in PRIMITIVE_STATES:
                return PRIMITIVE_STATES[expr.name]
            return self.instantiate(expr.name, (), depth)
        if type(expr) is Struct:
            return self.instantiate(expr.functor, tuple(self.resolve(a, env, depth) for a in expr.args), depth)
        raise DefinitionError(f"not a type expression: {expr!r}")

    def resolve_prop(self, name: str, type_args: Sequence[Term] = ()) -> int:
        """State checked by a prop literal with the given type arguments."""
        if name == "ground" and not type_args:
            return GROUND
        if name in PRIMITIVE_STATES and not type_args:
            return PRIMITIVE_STATES[name]
        return self.instantiate(name, tuple(self.resolve(a) for a in type_args))

    def automaton(self, state: int) -> "TypeAutomaton":
        self._check_state(state)
        return TypeAutomaton(self, state)


@dataclass(frozen=True)
class TypeAutomaton:
    """The part of a TypeTable reachable from one final state."""
    table: TypeTable = field(compare=False)
    final: int

    @property
    def name(self) -> str:
        return self.table.name(self.final)

    def states(self) -> List[int]:
        order = []
        seen = set()
        stack = [self.final]
        while stack:
            q = stack.pop()
            if q in seen:
                continue
            seen.add(q)
            order.append(q)
            if not self.table.is_primitive(q) and q != GROUND:
                for _, args in self.table.constructors(q):
                    stack.extend(reversed(args))
        return order

    def transitions(self) -> List[Tuple[tuple, Tuple[int, ...], int]]:
        result = []
        for q in self.states():
            if self.table.is_primitive(q) or q == GROUND:
                continue
            for key, args in self.table.constructors(q):
                result.append((key, args, q))
        return result

    def is_deterministic(self) -> bool:
        seen = set()
        for key, _, target in self.transitions():
            if (key, target) in seen:
                return False
            seen.add((key, target))
        return True

    def dump(self) -> str:
        lines = []
        for key, args, target in self.transitions():
            text = functor_label(key)
            if args:
                text += "(" + ",".join(self.table.name(a) for a in args) + ")"
            lines.append(f"{text} -> {self.table.name(target)}")
        return "\n".join(lines)


def instantiate_parametric(table: TypeTable, name: str, args: Sequence = ()) -> TypeAutomaton:
    """Automaton for `name` applied to concrete type arguments.

    Arguments may be state ids, TypeAutomaton objects, type-expression terms
    or type-expression strings such as "list(int)".
    """
    states = []
    for arg in args:
        if isinstance(arg, TypeAutomaton):
            states.append(arg.final)
        elif isinstance(arg, int):
            table._check_state(arg)
            states.append(arg)
        elif isinstance(arg, Term):
            states.append(table.resolve(arg))
        else:
            from .parser import parse_term
            states.append(table.resolve(parse_term(str(arg))[0]))
    return table.automaton(table.instantiate(name, tuple(states)))


def constructors(table: TypeTable, state: int):
    return table.constructors(state)


def brute_force_recognize(x: Term, t: int, table: TypeTable, store=None) -> bool:
    """Run the automaton over `x` with no cache; free variables only match `any`."""
    if t == GROUND:
        return is_ground(x, store)
    deref = store.deref if store is not None else (lambda term: term)
    sets = table.constructor_sets()
    stack = [(x, t)]
    while stack:
        term, state = stack.pop()
        term = deref(term)
        if state < FIRST_USER_STATE:
            if not primitive_accepts(state, term):
                return False
            continue
        if type(term) is Var:
            return False
        args = sets[state].get(term.key)
        if args is None:
            return False
        if args:
            stack.extend(zip(term.args, args))
    return True
