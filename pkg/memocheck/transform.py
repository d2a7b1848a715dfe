"""
Memocheck Transformation

This module provides the wrapper transformation: every predicate with
assertions is renamed and called through a wrapper that reifies each prop
literal once into a 0/1 status bit, combines the bits with bitwise
and/or/xor, and reports the labels of the conditions whose bit is 0.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .assertions import (
    AssertionCondition,
    ConditionKind,
    Dnf,
    PropLiteral,
    dnf_is_true,
    dnf_literals,
    normalize_assertions,
)
from .automata import TypeTable
from .checker import CheckedProp, PropChecker, compile_prop
from .performance import timed
from .program import Predicate, Program
from .terms import NodeIds, Struct, Term, TermFactory, Var, format_term

# =============================================================================
# BIT EXPRESSIONS
# =============================================================================


@dataclass(frozen=True)
class Bit:
    index: int


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class And:
    left: "BitExpr"
    right: "BitExpr"


@dataclass(frozen=True)
class Or:
    left: "BitExpr"
    right: "BitExpr"


@dataclass(frozen=True)
class Xor1:
    """`A # 1`, the negation used for implications."""
    operand: "BitExpr"


BitExpr = Union[Bit, Const, And, Or, Xor1]


def evaluate_expr(expr: BitExpr, bits: Mapping[int, int]) -> int:
    kind = type(expr)
    if kind is Bit:
        return bits[expr.index]
    if kind is And:
        return evaluate_expr(expr.left, bits) & evaluate_expr(expr.right, bits)
    if kind is Or:
        return evaluate_expr(expr.left, bits) | evaluate_expr(expr.right, bits)
    if kind is Xor1:
        return evaluate_expr(expr.operand, bits) ^ 1
    return expr.value


def expr_bits(expr: BitExpr) -> List[int]:
    """Bits read by `expr`, left to right."""
    kind = type(expr)
    if kind is Bit:
        return [expr.index]
    if kind is And or kind is Or:
        return expr_bits(expr.left) + expr_bits(expr.right)
    if kind is Xor1:
        return expr_bits(expr.operand)
    return []


def _conjoin(exprs: Sequence[BitExpr]) -> BitExpr:
    if not exprs:
        return Const(1)
    result = exprs[0]
    for e in exprs[1:]:
        result = And(result, e)
    return result


def _disjoin(exprs: Sequence[BitExpr]) -> BitExpr:
    if not exprs:
        return Const(0)
    result = exprs[0]
    for e in exprs[1:]:
        result = Or(result, e)
    return result


# =============================================================================
# REIFIED FORMULAS
# =============================================================================

@dataclass(frozen=True)
class ReifyStep:
    """`reify_check(prop, R<bit>)`; `guards` are the Pre bits that make it relevant."""
    bit: int
    prop: PropLiteral
    check: Optional[CheckedProp] = None
    guards: Tuple[int, ...] = ()


@dataclass(frozen=True)
class BitAssign:
    """`R<bit> is <expr>`."""
    bit: int
    expr: BitExpr


@dataclass(frozen=True)
class ReifiedFormula:
    steps: Tuple[ReifyStep, ...]
    assigns: Tuple[BitAssign, ...]
    result: BitExpr
    parts: Tuple[Tuple[str, BitExpr], ...] = ()

    @property
    def operations(self) -> int:
        return len(self.assigns)


def evaluate_formula(formula: ReifiedFormula, bits: Mapping[int, int]) -> int:
    """Evaluate assigns then the result; `bits` must hold every reify bit."""
    values = dict(bits)
    for assign in formula.assigns:
        values[assign.bit] = evaluate_expr(assign.expr, values)
    return evaluate_expr(formula.result, values)


def failed_parts(formula: ReifiedFormula, bits: Mapping[int, int]) -> List[str]:
    """Labels of the success conditions whose implication evaluates to 0."""
    values = dict(bits)
    for assign in formula.assigns:
        values[assign.bit] = evaluate_expr(assign.expr, values)
    return [label for label, expr in formula.parts if not evaluate_expr(expr, values)]


def reify_check(prop: Term, checker: PropChecker) -> int:
    return 1 if checker.check(prop) else 0


class FormulaCompiler:
    """Allocates status bits for one predicate's calls and success checks."""

    def __init__(self):
        self.next_bit = 0

    def bit(self) -> int:
        b = self.next_bit
        self.next_bit += 1
        return b

    def _reify(self, literals: Sequence[PropLiteral], steps: List[ReifyStep],
               known: Dict[str, int], guards: Optional[Dict[str, List[int]]] = None) -> None:
        for lit in literals:
            if lit.text not in known:
                known[lit.text] = self.bit()
                steps.append(ReifyStep(known[lit.text], lit, guards=tuple(guards.get(lit.text, ())) if guards else ()))

    def compile_calls(self, calls: AssertionCondition, pres: Sequence[Dnf]
                      ) -> Tuple[ReifiedFormula, Dict[str, int]]:
        """Calls side: reify the distinct literals of the calls formula, one bit per
        distinct Pre conjunction, one per distinct Pre disjunction and the
        disjunction of all of them as the result."""
        steps: List[ReifyStep] = []
        assigns: List[BitAssign] = []
        literals: Dict[str, int] = {}
        self._reify(dnf_literals(calls.pre) + [l for p in pres for l in dnf_literals(p)], steps, literals)
        conj_bits: Dict[Tuple[str, ...], BitExpr] = {}

        def conj_expr(conj) -> BitExpr:
            sig = tuple(l.text for l in conj)
            found = conj_bits.get(sig)
            if found is None:
                if not conj:
                    found = Const(1)
                elif len(conj) == 1:
                    found = Bit(literals[conj[0].text])
                else:
                    b = self.bit()
                    assigns.append(BitAssign(b, _conjoin([Bit(literals[l.text]) for l in conj])))
                    found = Bit(b)
                conj_bits[sig] = found
            return found

        calls_exprs = [conj_expr(c) for c in calls.pre]
        pre_bits: Dict[str, int] = {}
        for pre in pres:
            sig = _dnf_signature(pre)
            if sig in pre_bits:
                continue
            exprs = [conj_expr(c) for c in pre]
            if len(exprs) == 1 and type(exprs[0]) is Bit:
                pre_bits[sig] = exprs[0].index
            else:
                b = self.bit()
                assigns.append(BitAssign(b, _disjoin(exprs)))
                pre_bits[sig] = b
        if dnf_is_true(calls.pre):
            result: BitExpr = Const(1)
        elif len(calls_exprs) == 1:
            result = calls_exprs[0]
        else:
            b = self.bit()
            assigns.append(BitAssign(b, _disjoin(calls_exprs)))
            result = Bit(b)
        return ReifiedFormula(tuple(steps), tuple(assigns), result), pre_bits

    def compile_success(self, conditions: Sequence[AssertionCondition],
                        pre_bits: Mapping[str, int]) -> ReifiedFormula:
        """Success side: reify post literals afresh, reuse the Pre bits computed at call time."""
        steps: List[ReifyStep] = []
        literals: Dict[str, int] = {}
        guards: Dict[str, List[int]] = {}
        for cond in conditions:
            pre_bit = pre_bits[_dnf_signature(cond.pre)]
            for lit in dnf_literals(cond.post):
                if pre_bit not in guards.setdefault(lit.text, []):
                    guards[lit.text].append(pre_bit)
        self._reify([l for c in conditions for l in dnf_literals(c.post)], steps, literals, guards)
        parts = []
        for cond in conditions:
            pre = Bit(pre_bits[_dnf_signature(cond.pre)])
            post = _disjoin([_conjoin([Bit(literals[l.text]) for l in conj]) for conj in cond.post])
            parts.append((cond.label, Or(Xor1(pre), post)))
        result = _conjoin([expr for _, expr in parts])
        return ReifiedFormula(tuple(steps), (), result, tuple(parts))


def _dnf_signature(dnf: Dnf) -> str:
    return ";".join("(" + ",".join(l.text for l in conj) + ")" for conj in dnf)


def compile_checks(conditions: Sequence[AssertionCondition]
                   ) -> Tuple[Optional[ReifiedFormula], Optional[ReifiedFormula], Tuple[int, ...]]:
    """Compile the calls and success checks for one predicate's normalized conditions.

    Returns the calls formula (None when nothing must run before the call),
    the success formula (None without success conditions) and the shared
    Pre bits in the order the check predicates pass them.
    """
    if not conditions:
        return None, None, ()
    calls = conditions[0]
    success = [c for c in conditions[1:] if c.kind is ConditionKind.SUCCESS and not c.trivial]
    compiler = FormulaCompiler()
    pres = [c.pre for c in success]
    needs_pre = any(not dnf_is_true(p) for p in pres)
    if dnf_is_true(calls.pre) and not needs_pre:
        calls_formula = None
        pre_bits: Dict[str, int] = {}
        if success:
            # every Pre is `true`: one constant bit shared by all conditions
            b = compiler.bit()
            calls_formula = ReifiedFormula((), (BitAssign(b, Const(1)),), Const(1))
            pre_bits = {_dnf_signature(p): b for p in pres}
    else:
        calls_formula, pre_bits = compiler.compile_calls(calls, pres)
    success_formula = compiler.compile_success(success, pre_bits) if success else None
    shared = tuple(sorted(set(pre_bits[_dnf_signature(p)] for p in pres)))
    return calls_formula, success_formula, shared


# =============================================================================
# WRAPPERS
# =============================================================================

def inner_name(name: str) -> str:
    return name + "'"


@dataclass
class WrapperSet:
    """Wrapper clause, check predicates and renamed definition of one predicate."""
    predicate: Predicate
    conditions: List[AssertionCondition]
    calls: Optional[ReifiedFormula]
    success: Optional[ReifiedFormula]
    shared: Tuple[int, ...]
    calls_checked: bool
    bit_count: int = 0

    @property
    def key(self) -> Tuple[str, int]:
        return self.predicate.key

    @property
    def inner(self) -> str:
        return inner_name(self.predicate.name)

    @property
    def calls_name(self) -> str:
        return f"{self.predicate.name}#c"

    @property
    def success_name(self) -> str:
        return f"{self.predicate.name}#s"

    @property
    def calls_label(self) -> str:
        return self.conditions[0].label

    @property
    def success_labels(self) -> List[str]:
        return [label for label, _ in self.success.parts] if self.success else []

    def render(self) -> List[str]:
        """Source clauses of the wrapper, the check predicates and the renamed definition."""
        return _Renderer(self).render()


def _bind_checks(formula: Optional[ReifiedFormula], table: TypeTable, positions) -> Optional[ReifiedFormula]:
    if formula is None:
        return None
    steps = tuple(ReifyStep(s.bit, s.prop, compile_prop(s.prop, table, positions[s.prop.subject.node_id]), s.guards)
                  for s in formula.steps)
    return ReifiedFormula(steps, formula.assigns, formula.result, formula.parts)


def wrap(predicate: Predicate, conditions: Sequence[AssertionCondition],
         table: TypeTable) -> Optional[WrapperSet]:
    """Build the wrapper of `predicate`, or None when it has no conditions."""
    if not conditions:
        return None
    calls, success, shared = compile_checks(conditions)
    if calls is None and success is None:
        return None
    head = conditions[0].head
    positions = {v.node_id: i for i, v in enumerate(head.args)}
    calls = _bind_checks(calls, table, positions)
    success = _bind_checks(success, table, positions)
    bit_count = 0
    for formula in (calls, success):
        if formula is not None:
            for step in formula.steps:
                bit_count = max(bit_count, step.bit + 1)
            for assign in formula.assigns:
                bit_count = max(bit_count, assign.bit + 1)
    return WrapperSet(predicate, list(conditions), calls, success, shared,
                      calls_checked=not dnf_is_true(conditions[0].pre), bit_count=bit_count)


class _Renderer:
    def __init__(self, wrapper: WrapperSet):
        self.w = wrapper
        # fresh variables must not reuse an id printed under a head name
        self.make = TermFactory(NodeIds(_max_node_id(wrapper.conditions) + 1))
        head = wrapper.conditions[0].head
        self.head_args = list(head.args)
        self.names = {v.node_id: (v.name if v.name and v.name != "_" else f"A{i}")
                      for i, v in enumerate(head.args)}
        self.bit_vars: Dict[int, Var] = {}

    def bit_var(self, index: int) -> Var:
        var = self.bit_vars.get(index)
        if var is None:
            var = self.make.var(f"R{index}")
            self.bit_vars[index] = var
        return var

    def expr_term(self, expr: BitExpr) -> Term:
        m = self.make
        kind = type(expr)
        if kind is Bit:
            return self.bit_var(expr.index)
        if kind is Const:
            return m.integer(expr.value)
        if kind is Xor1:
            return m.struct("#", (self.expr_term(expr.operand), m.integer(1)))
        op = "/\\" if kind is And else "\\/"
        return m.struct(op, (self.expr_term(expr.left), self.expr_term(expr.right)))

    def fmt(self, term: Term) -> str:
        return format_term(term, names=self.names, max_prec=999)

    def call(self, name: str, extra: Sequence[Term] = ()) -> Term:
        return self.make.struct(name, tuple(self.head_args) + tuple(extra))

    def clause(self, head: Term, body: Sequence[Term]) -> str:
        if not body:
            return self.fmt(head) + "."
        goals = ",\n    ".join(self.fmt(g) for g in body)
        return f"{self.fmt(head)} :-\n    {goals}."

    def formula_goals(self, formula: ReifiedFormula) -> List[Term]:
        m = self.make
        goals = []
        for step in formula.steps:
            goals.append(m.struct("reify_check", (_literal_term(step.prop, m), self.bit_var(step.bit))))
        for assign in formula.assigns:
            goals.append(m.struct("is", (self.bit_var(assign.bit), self.expr_term(assign.expr))))
        return goals

    def render(self) -> List[str]:
        w = self.w
        m = self.make
        shared = [self.bit_var(b) for b in w.shared]
        body = []
        if w.calls is not None:
            body.append(self.call(w.calls_name, shared))
        body.append(self.call(w.inner))
        if w.success is not None:
            body.append(self.call(w.success_name, shared))
        lines = [self.clause(self.call(w.predicate.name), body)]
        if w.calls is not None:
            goals = self.formula_goals(w.calls)
            if w.calls_checked:
                goals.append(m.struct("error_if_false", (self.expr_term(w.calls.result), m.atom(w.calls_label))))
            if not goals:
                goals.append(m.atom("true"))
            lines.append(self.clause(self.call(w.calls_name, shared), goals))
        if w.success is not None:
            goals = self.formula_goals(w.success)
            if len(w.success.parts) == 1:
                label, expr = w.success.parts[0]
                goals.append(m.struct("error_if_false", (self.expr_term(expr), m.atom(label))))
            else:
                part_vars = []
                next_bit = w.bit_count
                for label, expr in w.success.parts:
                    var = self.bit_var(next_bit)
                    next_bit += 1
                    goals.append(m.struct("is", (var, self.expr_term(expr))))
                    part_vars.append((label, var))
                result = self.bit_var(next_bit)
                goals.append(m.struct("is", (result, self.expr_term(_conjoin([Bit(b) for b in
                                                                              range(w.bit_count, next_bit)])))))
                pairs = m.list_of(m.struct("-", (m.atom(label), var)) for label, var in part_vars)
                goals.append(m.struct("error_if_false", (result, pairs)))
            lines.append(self.clause(self.call(w.success_name, shared), goals))
        for clause in w.predicate.clauses:
            head, rest = clause.pattern()
            renamed = Struct(head.node_id, w.inner, head.args) if type(head) is Struct else m.atom(w.inner)
            text = format_term(renamed, max_prec=999)
            if rest:
                text += " :- " + ", ".join(format_term(g, max_prec=999) for g in rest)
            lines.append(text + ".")
        return lines


def _literal_term(literal: PropLiteral, make: TermFactory) -> Term:
    return make.struct(literal.name, literal.args)


def _max_node_id(conditions: Sequence[AssertionCondition]) -> int:
    stack: List[Term] = []
    for cond in conditions:
        stack.append(cond.head)
        for dnf in (cond.pre, cond.post or ()):
            stack.extend(arg for lit in dnf_literals(dnf) for arg in lit.args)
    top = 0
    while stack:
        term = stack.pop()
        top = max(top, term.node_id)
        if type(term) is Struct:
            stack.extend(term.args)
    return top


# =============================================================================
# PROGRAM TRANSFORMATION
# =============================================================================

@dataclass
class CompiledProgram:
    """A program together with its type table and per-predicate wrappers."""
    program: Program
    table: TypeTable
    wrappers: Dict[Tuple[str, int], WrapperSet] = field(default_factory=dict)

    def wrapper(self, key: Tuple[str, int]) -> Optional[WrapperSet]:
        return self.wrappers.get(key)

    def render(self) -> str:
        """The transformed program in source syntax; it runs with assertions
        stripped and reports the same labels through the check built-ins."""
        blocks = []
        for pred in self.program:
            lines = []
            if pred.is_regtype:
                lines.append(f":- regtype {format_term(_atom(pred.name))}/{pred.arity}.")
            wrapper = self.wrappers.get(pred.key)
            if wrapper is not None:
                lines.extend(wrapper.render())
            else:
                lines.extend(c.to_source() for c in pred.clauses)
            if lines:
                blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + ("\n" if blocks else "")


def _atom(name: str) -> Term:
    return TermFactory().atom(name)


@timed("transform")
def transform_program(program: Program, table: Optional[TypeTable] = None,
                      depth_bound: int = 64, array_limit: int = 8) -> CompiledProgram:
    """Normalize the assertions of every predicate and wrap it."""
    if table is None:
        table = TypeTable(program, depth_bound=depth_bound, array_limit=array_limit)
    compiled = CompiledProgram(program, table)
    for pred in program:
        if not pred.assertions or pred.is_regtype:
            continue
        conditions = normalize_assertions(pred.assertions, pred.name, pred.arity)
        wrapper = wrap(pred, conditions, table)
        if wrapper is not None:
            compiled.wrappers[pred.key] = wrapper
    return compiled
