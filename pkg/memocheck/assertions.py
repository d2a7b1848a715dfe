"""
Memocheck Assertion Model

This module provides `pred` assertions, their normalization into labeled
calls/success assertion conditions, and the cacheability classification of
prop literals.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Container, Dict, List, Optional, Sequence, Tuple

from .errors import DefinitionError
from .terms import Atom, Struct, Term, TermFactory, Var, copy_term, format_term, is_ground


class PropClass(str, Enum):
    NEVER = "never"
    CHEAP = "cheap"
    CACHEABLE = "cacheable"


PRIMITIVE_PROPS = ("int", "flt", "num", "atm", "term")

BUILTIN_PROP_CLASSES: Dict[str, PropClass] = {
    "var": PropClass.NEVER,
    "int": PropClass.CHEAP,
    "flt": PropClass.CHEAP,
    "num": PropClass.CHEAP,
    "atm": PropClass.CHEAP,
    "term": PropClass.CHEAP,
    "ground": PropClass.CACHEABLE,
}


@dataclass(frozen=True)
class PropLiteral:
    """A prop applied to a subject and, for regtypes, type arguments.

    Two literals are the same occurrence when they print identically.
    """
    name: str
    args: tuple = field(compare=False)
    text: str = ""

    @classmethod
    def from_term(cls, term: Term) -> "PropLiteral":
        if type(term) is Atom:
            raise DefinitionError(f"prop {term.name} has no subject")
        if type(term) is not Struct:
            raise DefinitionError(f"not a prop literal: {format_term(term)}")
        if term.functor == "call" and len(term.args) >= 2 and type(term.args[0]) is Atom:
            term = Struct(term.node_id, term.args[0].name, term.args[1:])
        return cls(term.functor, term.args, format_term(term))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def key(self) -> Tuple[str, int]:
        return (self.name, len(self.args))

    @property
    def subject(self) -> Term:
        return self.args[0]

    @property
    def type_args(self) -> tuple:
        return self.args[1:]

    def renamed(self, mapping: Dict[int, Term], make: TermFactory) -> "PropLiteral":
        args = tuple(copy_term(a, make, mapping) for a in self.args)
        term = make.struct(self.name, args)
        return PropLiteral(self.name, args, format_term(term))

    def __str__(self) -> str:
        return self.text


Conjunction = Tuple[PropLiteral, ...]
Dnf = Tuple[Conjunction, ...]

TRUE_DNF: Dnf = ((),)
FALSE_DNF: Dnf = ()


def _dedupe_conj(literals) -> Conjunction:
    seen = set()
    out = []
    for lit in literals:
        if lit.text not in seen:
            seen.add(lit.text)
            out.append(lit)
    return tuple(out)


def _dedupe_dnf(conjs) -> Dnf:
    seen = set()
    out = []
    for conj in conjs:
        sig = tuple(lit.text for lit in conj)
        if sig not in seen:
            seen.add(sig)
            out.append(conj)
    return tuple(out)


def to_dnf(formula: Optional[Term]) -> Dnf:
    """Distribute `,` over `;` into a disjunction of conjunctions."""
    if formula is None:
        return TRUE_DNF
    if type(formula) is Var:
        raise DefinitionError("a prop formula cannot be a variable")
    if type(formula) is Atom:
        if formula.name == "true":
            return TRUE_DNF
        if formula.name in ("fail", "false"):
            return FALSE_DNF
    if type(formula) is Struct and len(formula.args) == 2:
        if formula.functor == ",":
            left = to_dnf(formula.args[0])
            right = to_dnf(formula.args[1])
            return _dedupe_dnf(_dedupe_conj(a + b) for a in left for b in right)
        if formula.functor == ";":
            return _dedupe_dnf(to_dnf(formula.args[0]) + to_dnf(formula.args[1]))
    return ((PropLiteral.from_term(formula),),)


def dnf_is_true(dnf: Dnf) -> bool:
    return any(len(conj) == 0 for conj in dnf)


def dnf_literals(dnf: Dnf) -> List[PropLiteral]:
    """Distinct literals in textual order of first occurrence."""
    seen = set()
    out = []
    for conj in dnf:
        for lit in conj:
            if lit.text not in seen:
                seen.add(lit.text)
                out.append(lit)
    return out


def dnf_text(dnf: Dnf) -> str:
    return join_alternatives([[lit.text for lit in conj] for conj in dnf])


def join_alternatives(alternatives: Sequence[Sequence[str]]) -> str:
    """Disjunction text; a conjunction of several literals is parenthesized so it
    reads as one argument of the calls/success term."""
    if not alternatives:
        return "fail"
    if any(not conj for conj in alternatives):
        return "true"
    return " ; ".join(f"({', '.join(conj)})" if len(conj) > 1 else conj[0] for conj in alternatives)


@dataclass(frozen=True)
class PredAssertion:
    """`:- pred Head : Pre => Post.` with Pre and Post in DNF."""
    head: Term
    pre: Dnf
    post: Optional[Dnf]
    line: int = 0
    pre_source: Optional[Term] = field(default=None, compare=False)
    post_source: Optional[Term] = field(default=None, compare=False)

    @property
    def key(self) -> Tuple[str, int]:
        return (self.head.name, len(self.head.args))

    def to_source(self) -> str:
        text = f":- pred {format_term(self.head, max_prec=999)}"
        if self.pre_source is not None:
            text += f" : {format_term(self.pre_source, max_prec=999)}"
        if self.post_source is not None:
            text += f" => {format_term(self.post_source, max_prec=999)}"
        return text + "."


class ConditionKind(str, Enum):
    CALLS = "calls"
    SUCCESS = "success"


@dataclass(frozen=True)
class AssertionCondition:
    kind: ConditionKind
    head: Term
    pre: Dnf
    post: Optional[Dnf]
    label: str
    line: int = 0

    @property
    def trivial(self) -> bool:
        if self.kind is ConditionKind.CALLS:
            return dnf_is_true(self.pre)
        return self.post is None or dnf_is_true(self.post)

    def describe(self) -> str:
        head = format_term(self.head)
        if self.kind is ConditionKind.CALLS:
            return f"calls({head}, {dnf_text(self.pre)})"
        return f"success({head}, {dnf_text(self.pre)}, {dnf_text(self.post)})"


def _check_head(assertion: PredAssertion) -> Dict[int, int]:
    positions: Dict[int, int] = {}
    for i, arg in enumerate(assertion.head.args):
        if type(arg) is not Var or arg.node_id in positions:
            raise DefinitionError(
                f"assertion head {format_term(assertion.head)} must have distinct variables",
                details={"line": assertion.line})
        positions[arg.node_id] = i
    return positions


def _check_literal(lit: PropLiteral, heads: Container[int], line: int) -> None:
    subject = lit.subject
    if type(subject) is not Var or subject.node_id not in heads:
        raise DefinitionError(f"prop {lit.text} must apply to a head variable", details={"line": line})
    for arg in lit.type_args:
        if not is_ground(arg):
            raise DefinitionError(f"type argument of {lit.text} must be ground", details={"line": line})


def normalize_assertions(assertions: Sequence[PredAssertion], name: Optional[str] = None,
                         arity: Optional[int] = None) -> List[AssertionCondition]:
    """Build calls(Head, Pre_1 ; ... ; Pre_n) and one success condition per Post.

    All assertions are renamed onto the head of the first one. Success
    conditions without a nontrivial Post are left out.
    """
    if not assertions:
        return []
    first = assertions[0]
    name = name or first.head.name
    arity = len(first.head.args) if arity is None else arity
    make = TermFactory()
    canonical: Optional[Term] = None
    calls_pre: List[Conjunction] = []
    success: List[AssertionCondition] = []
    for index, assertion in enumerate(assertions, start=1):
        if assertion.key != (name, arity):
            raise DefinitionError(
                f"assertion head {format_term(assertion.head)} does not match {name}/{arity}",
                details={"line": assertion.line})
        _check_head(assertion)
        if canonical is None:
            canonical = copy_term(assertion.head, make)
        mapping = {arg.node_id: canonical.args[i] for i, arg in enumerate(assertion.head.args)}
        for conj in assertion.pre + (assertion.post or ()):
            for lit in conj:
                _check_literal(lit, mapping, assertion.line)
        pre = tuple(tuple(lit.renamed(dict(mapping), make) for lit in conj) for conj in assertion.pre)
        calls_pre.extend(pre)
        if assertion.post is None:
            continue
        post = tuple(tuple(lit.renamed(dict(mapping), make) for lit in conj) for conj in assertion.post)
        condition = AssertionCondition(ConditionKind.SUCCESS, canonical, pre, post,
                                       f"{name}/{arity}#{index}", assertion.line)
        if not condition.trivial:
            success.append(condition)
    calls = AssertionCondition(ConditionKind.CALLS, canonical, _dedupe_dnf(calls_pre), None,
                               f"{name}/{arity}#0", first.line)
    return [calls] + success


@dataclass(frozen=True)
class LabeledCondition:
    """A condition renamed onto one call-site atom, with its own asr-id."""
    condition: AssertionCondition
    atom: Term
    asr_id: str

    @property
    def label(self) -> str:
        return self.condition.label

    def describe(self, store=None) -> str:
        make = TermFactory()
        mapping = {v.node_id: a for v, a in zip(self.condition.head.args, self.atom.args)}

        def render(dnf: Dnf) -> str:
            return join_alternatives([
                [format_term(copy_term(make.struct(l.name, l.args), make, dict(mapping)), store) for l in conj]
                for conj in dnf
            ])

        head = format_term(self.atom, store)
        if self.condition.kind is ConditionKind.CALLS:
            return f"calls({head}, {render(self.condition.pre)})"
        return f"success({head}, {render(self.condition.pre)}, {render(self.condition.post)})"


def label_instances(atom: Term, conditions: Sequence[AssertionCondition],
                    next_id: Callable[[], int]) -> List[LabeledCondition]:
    if not conditions:
        return []
    k = next_id()
    return [LabeledCondition(c, atom, f"{c.label}@{k}") for c in conditions]


def classify_prop(literal: PropLiteral, regtypes: Container[Tuple[str, int]]) -> PropClass:
    if literal.arity == 1 and literal.name in BUILTIN_PROP_CLASSES:
        return BUILTIN_PROP_CLASSES[literal.name]
    if literal.key in regtypes:
        return PropClass.CACHEABLE
    raise DefinitionError(f"undeclared property {literal.name}/{literal.arity}",
                          details={"prop": literal.text})
