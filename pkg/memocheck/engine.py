"""
Memocheck Engine

This module provides the interpreter: leftmost selection, clauses in
textual order, chronological backtracking over an explicit goal list and
choice-point stack, with assertion wrappers that run calls checks before a
predicate body and success checks after it, recording violations in the
error set of the current branch.
"""

import itertools
import logging
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Tuple, Union

from .assertions import AssertionCondition, ConditionKind, label_instances
from .automata import PRIMITIVE_STATES, primitive_accepts
from .cache import CacheConfig, cache_update_semantics_check, make_cache
from .checker import PropChecker
from .config import ErrorMode, MemocheckConfig
from .errors import CacheAuditError, CheckedError, DebugLevel, DefinitionError, EvaluationError, get_debug_context
from .parser import parse_program, parse_term
from .performance import CacheStats, EngineCounters, timed
from .program import Clause, Predicate, Program
from .terms import (
    Atom,
    BindingStore,
    Float,
    Int,
    Struct,
    Term,
    TermFactory,
    Var,
    check_int_range,
    copy_term,
    format_term,
    is_ground,
    list_items,
    term_vars,
    unify,
)
from .transform import CompiledProgram, WrapperSet, evaluate_expr, transform_program

logger = logging.getLogger(__name__)

CONTROL = {(",", 2), (";", 2), ("->", 2), ("\\+", 1), ("!", 0), ("true", 0), ("fail", 0), ("false", 0)}
CALL_ARITIES = range(1, 9)


class Status(str, Enum):
    RUNNING = "running"
    ANSWER = "answer"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class Violation:
    """One falsified assertion-condition instance."""
    asr_id: str
    label: str
    kind: ConditionKind
    predicate: str
    line: int = 0
    call: str = ""
    condition: str = ""

    def describe(self) -> str:
        where = f" (line {self.line})" if self.line else ""
        text = f"{self.kind.value} assertion {self.label}{where} of {self.predicate} violated"
        if self.condition:
            text += f": {self.condition}"
        elif self.call:
            text += f" by {self.call}"
        return f"{text} [{self.asr_id}]"


@dataclass(frozen=True)
class Answer:
    """Bindings of the named query variables and the error set of the branch."""
    bindings: Tuple[Tuple[str, str], ...]
    errors: Tuple[Violation, ...] = ()

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(v.label for v in self.errors)

    @property
    def asr_ids(self) -> Tuple[str, ...]:
        return tuple(v.asr_id for v in self.errors)

    def as_dict(self) -> Dict[str, str]:
        return dict(self.bindings)

    def __str__(self) -> str:
        if not self.bindings:
            return "true"
        return ", ".join(f"{name} = {value}" for name, value in self.bindings)


# =============================================================================
# MACHINE STATE
# =============================================================================

class Frame:
    """Cell of the goal list; `cut` is the choice-point height a `!` cuts back to."""
    __slots__ = ("goal", "cut", "next")

    def __init__(self, goal, cut: int, next: Optional["Frame"]):
        self.goal = goal
        self.cut = cut
        self.next = next


class _CutTo:
    __slots__ = ("height",)

    def __init__(self, height: int):
        self.height = height


class _NotFail(_CutTo):
    __slots__ = ()


class _SuccessCheck:
    """Deferred success check of one wrapped call."""
    __slots__ = ("wrapper", "goal", "bits", "instance")

    def __init__(self, wrapper: WrapperSet, goal: Term, bits: List[int], instance: int):
        self.wrapper = wrapper
        self.goal = goal
        self.bits = bits
        self.instance = instance


class ChoicePoint:
    __slots__ = ("epoch", "errors", "goal", "clauses", "index", "cont", "alt", "wrapper")

    def __init__(self, epoch: int, errors: int, goal: Optional[Term] = None,
                 clauses: Tuple[Clause, ...] = (), index: int = 0, cont: Optional[Frame] = None,
                 alt: Optional[Frame] = None, wrapper: Optional[WrapperSet] = None):
        self.epoch = epoch
        self.errors = errors
        self.goal = goal
        self.clauses = clauses
        self.index = index
        self.cont = cont
        self.alt = alt
        self.wrapper = wrapper


@dataclass
class MachineState:
    """Goal list, choice points and the error set of the current branch.

    The binding store and the cache belong to the engine.
    """
    goals: Optional[Frame] = None
    choicepoints: List[ChoicePoint] = field(default_factory=list)
    errors: List[Violation] = field(default_factory=list)
    status: Status = Status.EXHAUSTED


def _answer_name(index: int) -> str:
    letter = string.ascii_uppercase[index % 26]
    suffix = index // 26
    return f"_{letter}{suffix}" if suffix else f"_{letter}"


# =============================================================================
# ENGINE
# =============================================================================

class Engine:
    """One interpreter with its own store, cache and counters."""

    def __init__(self, program: Union[Program, CompiledProgram, str],
                 config: Optional[MemocheckConfig] = None, **overrides):
        config = config or MemocheckConfig()
        if overrides:
            config = config.with_overrides(**overrides)
        self.config = config
        if isinstance(program, str):
            program = parse_program(program)
        if isinstance(program, CompiledProgram):
            compiled = program
        else:
            compiled = transform_program(program, depth_bound=config.instantiation_depth_bound,
                                         array_limit=config.dispatch_array_limit)
        self.compiled = compiled
        self.program = compiled.program
        self.table = compiled.table
        self.make = TermFactory()
        self.store = BindingStore(self.make, occurs_check=config.occurs_check)
        self.stats = CacheStats()
        self.counters = EngineCounters()
        self.cache = make_cache(config.cache_config(), self.stats,
                                chaos_rate=config.chaos_flush_rate, chaos_seed=config.chaos_seed)
        self.store.subscribe(self.cache.invalidate)
        self.checker = PropChecker(self.store, self.table, self.cache, self.stats, shadow=config.shadow_check)
        self.wrappers: Dict[Tuple[str, int], WrapperSet] = dict(compiled.wrappers) if config.rtchecks else {}
        self.abort = config.on_error is ErrorMode.ABORT
        self.violations: List[Violation] = []
        self.state = MachineState()
        self.query_vars: List[Tuple[str, Var]] = []
        self._instances = itertools.count(1)
        self._conditions: Dict[str, AssertionCondition] = {}
        for wrapper in self.wrappers.values():
            for cond in wrapper.conditions:
                self._conditions[cond.label] = cond
        self._debug = get_debug_context()
        self._builtins: Dict[Tuple[str, int], Callable[[tuple], bool]] = self._make_builtins()
        self._check_definitions()

    # Setup ------------------------------------------------------------------

    def _make_builtins(self) -> Dict[Tuple[str, int], Callable[[tuple], bool]]:
        table = {
            ("=", 2): lambda a: unify(a[0], a[1], self.store),
            ("\\=", 2): self._not_unifiable,
            ("is", 2): self._is,
            ("<", 2): lambda a: self._compare(a) < 0,
            (">", 2): lambda a: self._compare(a) > 0,
            ("=<", 2): lambda a: self._compare(a) <= 0,
            (">=", 2): lambda a: self._compare(a) >= 0,
            ("=:=", 2): lambda a: self._compare(a) == 0,
            ("=\\=", 2): lambda a: self._compare(a) != 0,
            ("var", 1): lambda a: type(self.store.deref(a[0])) is Var,
            ("ground", 1): lambda a: is_ground(a[0], self.store),
            ("reify_check", 2): self._reify_check,
            ("error_if_false", 2): self._error_if_false,
        }
        for name in ("int", "flt", "num", "atm", "term"):
            state = PRIMITIVE_STATES[name]
            table[(name, 1)] = (lambda s: lambda a: primitive_accepts(s, self.store.deref(a[0])))(state)
        return table

    def is_builtin(self, key: Tuple[str, int]) -> bool:
        return key in CONTROL or key in self._builtins or (key[0] == "call" and key[1] in CALL_ARITIES)

    def _check_definitions(self) -> None:
        """Every goal named in a clause body must be a built-in or a predicate."""
        for pred in self.program:
            for clause in pred.clauses:
                stack = list(clause.body)
                while stack:
                    goal = stack.pop()
                    if type(goal) not in (Atom, Struct):
                        continue
                    key = goal.key
                    if key in ((",", 2), (";", 2), ("->", 2), ("\\+", 1)):
                        stack.extend(goal.args)
                        continue
                    if self.is_builtin(key):
                        continue
                    found = self.program.lookup(key)
                    if found is None:
                        raise DefinitionError(
                            f"unknown predicate {goal.name}/{len(goal.args)} called from "
                            f"{pred.name}/{pred.arity}",
                            details={"line": clause.line})

    # Queries ----------------------------------------------------------------

    def _prepare(self, query: Union[str, Term]) -> Tuple[Term, List[Tuple[str, Var]]]:
        if isinstance(query, str):
            goal, varmap = parse_term(query, self.make)
            named = [(name, var) for name, var in varmap.items() if not name.startswith("_")]
            return goal, named
        mapping: Dict[int, Term] = {}
        goal = copy_term(query, self.make, mapping)
        named = []
        for var in term_vars(query):
            if var.name and not var.name.startswith("_"):
                named.append((var.name, mapping[var.node_id]))
        return goal, named

    def start(self, query: Union[str, Term]) -> MachineState:
        goal, named = self._prepare(query)
        if type(goal) not in (Atom, Struct):
            raise EvaluationError(f"query is not callable: {format_term(goal)}")
        self.store.reset()
        self.query_vars = named
        self.state = MachineState(Frame(goal, 0, None), [], [], Status.RUNNING)
        return self.state

    def solve(self, query: Union[str, Term], limit: Optional[int] = None) -> Iterator[Answer]:
        """Enumerate answers to `query`, at most `limit` of them."""
        self.start(query)
        yield from self.answers(limit)

    def answers(self, limit: Optional[int] = None) -> Iterator[Answer]:
        """Continue the started query."""
        found = 0
        while limit is None or found < limit:
            state = self.step()
            if state.status is Status.ANSWER:
                found += 1
                yield self.answer()
            elif state.status is Status.EXHAUSTED:
                return

    @timed("solve")
    def run(self, query: Union[str, Term], limit: Optional[int] = None) -> List[Answer]:
        return list(self.solve(query, limit))

    def answer(self) -> Answer:
        names: Dict[int, str] = {}
        bindings = []
        for name, var in self.query_vars:
            for free in term_vars(var, self.store):
                if free.node_id not in names:
                    names[free.node_id] = _answer_name(len(names))
            bindings.append((name, format_term(var, self.store, names)))
        return Answer(tuple(bindings), tuple(self.state.errors))

    # Stepping ---------------------------------------------------------------

    def step(self) -> MachineState:
        """Execute one goal, or backtrack once after an answer."""
        state = self.state
        if state.status is Status.EXHAUSTED:
            return state
        if state.status is Status.ANSWER:
            state.status = Status.RUNNING
            self._backtrack()
            return state
        frame = state.goals
        if frame is None:
            state.status = Status.ANSWER
            return state
        self.counters.steps += 1
        state.goals = frame.next
        goal = frame.goal
        if self._debug.trace_steps:
            self._debug.log(DebugLevel.TRACE, "Step", goal=self._goal_text(goal))
        kind = type(goal)
        if kind is _SuccessCheck:
            self._success_check(goal)
        elif kind is _NotFail:
            self._cut(goal.height)
            self._backtrack()
        elif kind is _CutTo:
            self._cut(goal.height)
        else:
            self._solve_goal(goal, frame)
        if self.config.debug_audit:
            self.cache.audit(self.store, self.table)
        return state

    def _goal_text(self, goal) -> str:
        if isinstance(goal, Term):
            return format_term(goal, self.store)
        return type(goal).__name__

    def _solve_goal(self, goal: Term, frame: Frame) -> None:
        store = self.store
        goal = store.deref(goal)
        kind = type(goal)
        if kind is Var:
            raise EvaluationError("instantiation error: goal is unbound")
        if kind is not Atom and kind is not Struct:
            raise EvaluationError(f"type error: {format_term(goal)} is not callable")
        key = goal.key
        state = self.state
        if key in CONTROL:
            self._control(goal, key, frame)
            return
        if key[0] == "call" and key[1] in CALL_ARITIES:
            state.goals = Frame(self._call_goal(goal), len(state.choicepoints), frame.next)
            return
        builtin = self._builtins.get(key)
        if builtin is not None:
            if not builtin(goal.args):
                self._backtrack()
            return
        pred = self.program.lookup(key)
        if pred is None:
            raise EvaluationError(f"unknown procedure {format_term(Atom(0, key[0]))}/{key[1]}",
                                  details={"predicate": f"{key[0]}/{key[1]}"})
        self._call_predicate(goal, pred, frame.next)

    def _control(self, goal: Term, key: Tuple[str, int], frame: Frame) -> None:
        state = self.state
        cps = state.choicepoints
        nxt = frame.next
        if key == (",", 2):
            state.goals = Frame(goal.args[0], frame.cut, Frame(goal.args[1], frame.cut, nxt))
        elif key == ("true", 0):
            pass
        elif key == ("fail", 0) or key == ("false", 0):
            self._backtrack()
        elif key == ("!", 0):
            self._cut(frame.cut)
        elif key == (";", 2):
            left = self.store.deref(goal.args[0])
            height = len(cps)
            self._push_alt(Frame(goal.args[1], frame.cut, nxt))
            if type(left) is Struct and left.key == ("->", 2):
                cond, then = left.args
                state.goals = Frame(cond, height + 1, Frame(_CutTo(height), 0, Frame(then, frame.cut, nxt)))
            else:
                state.goals = Frame(left, frame.cut, nxt)
        elif key == ("->", 2):
            height = len(cps)
            cond, then = goal.args
            state.goals = Frame(cond, height, Frame(_CutTo(height), 0, Frame(then, frame.cut, nxt)))
        else:  # \+
            height = len(cps)
            self._push_alt(nxt)
            state.goals = Frame(goal.args[0], height + 1, Frame(_NotFail(height), 0, None))

    def _call_goal(self, goal: Struct) -> Term:
        target = self.store.deref(goal.args[0])
        extra = goal.args[1:]
        if type(target) is Var:
            raise EvaluationError("instantiation error: call/N on an unbound goal")
        if type(target) is Atom:
            return self.make.struct(target.name, extra) if extra else target
        if type(target) is Struct:
            return Struct(self.make.ids(), target.functor, target.args + extra)
        raise EvaluationError(f"type error: {format_term(target)} is not callable")

    def _push_alt(self, alt: Optional[Frame]) -> None:
        state = self.state
        state.choicepoints.append(ChoicePoint(self.store.mark(), len(state.errors), alt=alt))

    def _cut(self, height: int) -> None:
        cps = self.state.choicepoints
        if len(cps) > height:
            self.store.release(cps[height].epoch)
            del cps[height:]

    def _backtrack(self) -> None:
        state = self.state
        cps = state.choicepoints
        self.counters.backtracks += 1
        if not cps:
            state.goals = None
            state.status = Status.EXHAUSTED
            return
        cp = cps[-1]
        self.store.undo_to_epoch(cp.epoch)
        del state.errors[cp.errors:]
        if cp.clauses:
            self._next_clause(cp, len(cps) - 1)
            return
        cps.pop()
        self.store.release(cp.epoch)
        state.goals = cp.alt

    # Resolution -------------------------------------------------------------

    def _call_predicate(self, goal: Term, pred: Predicate, cont: Optional[Frame]) -> None:
        state = self.state
        wrapper = self.wrappers.get(pred.key)
        if wrapper is not None and not self.config.strict_calls:
            cont = self._wrap_call(wrapper, goal, cont)
        first = None
        if pred.arity:
            first = self.store.deref(goal.args[0]).key
        clauses = pred.candidates(first)
        if not clauses:
            self._backtrack()
            return
        height = len(state.choicepoints)
        strict = wrapper if self.config.strict_calls else None
        if len(clauses) > 1:
            cp = ChoicePoint(self.store.mark(), len(state.errors), goal, clauses, 1, cont, wrapper=strict)
            state.choicepoints.append(cp)
        self._enter_clause(clauses[0], goal, cont, height, strict)

    def _next_clause(self, cp: ChoicePoint, height: int) -> None:
        clause = cp.clauses[cp.index]
        cp.index += 1
        if cp.index >= len(cp.clauses):
            self.state.choicepoints.pop()
            self.store.release(cp.epoch)
        self._enter_clause(clause, cp.goal, cp.cont, height, cp.wrapper)

    def _enter_clause(self, clause: Clause, goal: Term, cont: Optional[Frame], height: int,
                      strict: Optional[WrapperSet]) -> None:
        if strict is not None:
            cont = self._wrap_call(strict, goal, cont)
        if not clause.body:
            self.state.goals = cont
            return
        mapping: Dict[int, Term] = {v.node_id: a for v, a in zip(clause.head.args, goal.args)}
        make = self.make
        body = [copy_term(g, make, mapping) for g in clause.body]
        nxt = cont
        for g in reversed(body):
            nxt = Frame(g, height, nxt)
        self.state.goals = nxt

    # Assertion checking -----------------------------------------------------

    def _wrap_call(self, wrapper: WrapperSet, goal: Term, cont: Optional[Frame]) -> Optional[Frame]:
        """Run the calls checks of `goal` and queue its success check."""
        instance = next(self._instances)
        bits = [0] * wrapper.bit_count
        formula = wrapper.calls
        if formula is not None:
            self.counters.calls_checks += 1
            self._reify(formula.steps, goal, bits)
            for assign in formula.assigns:
                bits[assign.bit] = evaluate_expr(assign.expr, bits)
            if wrapper.calls_checked and not evaluate_expr(formula.result, bits):
                self._violation(wrapper.calls_label, goal, instance)
        if wrapper.success is None:
            return cont
        return Frame(_SuccessCheck(wrapper, goal, bits, instance), 0, cont)

    def _success_check(self, check: _SuccessCheck) -> None:
        wrapper = check.wrapper
        formula = wrapper.success
        bits = list(check.bits)
        self.counters.success_checks += 1
        self._reify(formula.steps, check.goal, bits, self.config.short_circuit)
        if evaluate_expr(formula.result, bits):
            return
        for label, expr in formula.parts:
            if not evaluate_expr(expr, bits):
                self._violation(label, check.goal, check.instance)

    def _reify(self, steps, goal: Term, bits: List[int], short_circuit: bool = False) -> None:
        evaluate = self.checker.evaluate
        args = goal.args
        audit = self.config.debug_audit
        before = self.cache.entries() if audit else None
        for step in steps:
            if short_circuit and step.guards and not any(bits[g] for g in step.guards):
                continue
            bits[step.bit] = 1 if evaluate(step.check, args[step.check.subject]) else 0
        if audit:
            props = [Struct(0, s.prop.name, (args[s.check.subject],) + s.prop.type_args) for s in steps]
            report = cache_update_semantics_check(props, self.store, before, dict(self.cache.resident()),
                                                  self.table)
            if not report.ok:
                raise CacheAuditError("; ".join(report.violations))

    def _violation(self, label: str, goal: Term, instance: int) -> None:
        condition = self._conditions.get(label)
        if condition is not None:
            labeled = label_instances(goal, [condition], lambda: instance)[0]
            asr_id = labeled.asr_id
            kind = condition.kind
            line = condition.line
            described = labeled.describe(self.store)
        else:
            asr_id = f"{label}@{instance}"
            kind = ConditionKind.CALLS if label.endswith("#0") else ConditionKind.SUCCESS
            line = 0
            described = ""
        predicate = label.rsplit("#", 1)[0]
        violation = Violation(asr_id, label, kind, predicate, line,
                              format_term(goal, self.store), described)
        self._record(violation)

    def _record(self, violation: Violation) -> None:
        self.state.errors.append(violation)
        self.violations.append(violation)
        self.counters.violations += 1
        logger.debug("assertion violated: %s", violation.describe())
        if self.abort:
            raise CheckedError(violation, errors=tuple(self.state.errors))

    # Built-ins --------------------------------------------------------------

    def _not_unifiable(self, args) -> bool:
        mark = self.store.trail_length()
        if unify(args[0], args[1], self.store):
            self.store.undo_silently(mark)
            return False
        return True

    def _eval(self, term: Term, floats: bool):
        t = self.store.deref(term)
        kind = type(t)
        if kind is Int:
            return t.value
        if kind is Float:
            if not floats:
                raise EvaluationError(f"type error: float {format_term(t)} in integer arithmetic")
            return t.value
        if kind is Var:
            raise EvaluationError("instantiation error in arithmetic")
        if kind is Atom:
            raise EvaluationError(f"type error: {format_term(t)} is not a number")
        op = t.functor
        if len(t.args) == 1:
            x = self._eval(t.args[0], floats)
            if op == "-":
                return -x
            if op == "abs":
                return abs(x)
            if op == "\\" and type(x) is int:
                return ~x
        elif len(t.args) == 2:
            x = self._eval(t.args[0], floats)
            y = self._eval(t.args[1], floats)
            if op == "+":
                return x + y
            if op == "-":
                return x - y
            if op == "*":
                return x * y
            if op == "max":
                return max(x, y)
            if op == "min":
                return min(x, y)
            if type(x) is int and type(y) is int:
                if op in ("//", "mod") and y == 0:
                    raise EvaluationError("evaluation error: division by zero")
                if op == "//":
                    q = abs(x) // abs(y)
                    return q if (x >= 0) == (y >= 0) else -q
                if op == "mod":
                    return x % y
                if op == "#":
                    return x ^ y
                if op == "/\\":
                    return x & y
                if op == "\\/":
                    return x | y
        raise EvaluationError(f"type error: cannot evaluate {format_term(t, self.store)}")

    def _is(self, args) -> bool:
        value = self._eval(args[1], floats=False)
        result = self.make.integer(check_int_range(value)) if type(value) is int else self.make.flt(value)
        return unify(args[0], result, self.store)

    def _compare(self, args) -> int:
        x = self._eval(args[0], floats=True)
        y = self._eval(args[1], floats=True)
        if type(x) is int:
            check_int_range(x)
        if type(y) is int:
            check_int_range(y)
        return (x > y) - (x < y)

    def _reify_check(self, args) -> bool:
        bit = 1 if self.checker.check(args[0]) else 0
        return unify(args[1], self.make.integer(bit), self.store)

    def _error_if_false(self, args) -> bool:
        status = self.store.deref(args[0])
        if type(status) is not Int:
            raise EvaluationError(f"error_if_false/2 expects a bit, got {format_term(status, self.store)}")
        if status.value:
            return True
        instance = next(self._instances)
        labels = self.store.deref(args[1])
        if type(labels) is Atom and labels.name != "[]":
            self._record(self._plain_violation(labels.name, instance))
            return True
        items, _ = list_items(labels, self.store)
        for item in items:
            item = self.store.deref(item)
            if type(item) is Struct and item.key == ("-", 2):
                label = self.store.deref(item.args[0])
                bit = self.store.deref(item.args[1])
                if type(bit) is Int and bit.value == 0 and type(label) is Atom:
                    self._record(self._plain_violation(label.name, instance))
        return True

    @staticmethod
    def _plain_violation(label: str, instance: int) -> Violation:
        kind = ConditionKind.CALLS if label.endswith("#0") else ConditionKind.SUCCESS
        return Violation(f"{label}@{instance}", label, kind, label.rsplit("#", 1)[0])


# =============================================================================
# CONVENIENCE ENTRY POINTS
# =============================================================================

def solve(query: Union[str, Term], program: Union[Program, CompiledProgram, str],
          cache_config: Optional[CacheConfig] = None,
          error_mode: ErrorMode = ErrorMode.CONTINUE, **overrides) -> Iterator[Answer]:
    """Enumerate the answers of `query` against `program`."""
    config = MemocheckConfig().with_overrides(on_error=error_mode, **overrides)
    if cache_config is not None:
        config = config.with_cache(cache_config)
    yield from Engine(program, config).solve(query)


def clause_level_succeeds(program: Union[Program, CompiledProgram, str], prop: Union[str, Term]) -> bool:
    """Run a prop through its clauses; true if the first answer binds none of
    the prop's variables."""
    engine = Engine(program, rtchecks=False, cache_policy="none")
    engine.start(prop)
    goal = engine.state.goals.goal
    free = term_vars(goal, engine.store)
    for _ in engine.answers(limit=1):
        values = [engine.store.deref(v) for v in free]
        return all(type(v) is Var for v in values) and len({v.node_id for v in values}) == len(values)
    return False
