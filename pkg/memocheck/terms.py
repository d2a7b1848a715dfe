"""
Memocheck Terms

This module provides Herbrand terms with engine-unique node ids, the binding
store (bindings, trail and epochs), unification, term copying and the term
printer shared by the parser, the transformation and the CLI.
"""

import re
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from .errors import EvaluationError, InternalError

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1

LIST_FUNCTOR = "."
NIL = "[]"

# (priority, type) tables used by both the parser and the printer
INFIX_OPS: Dict[str, Tuple[int, str]] = {
    ":-": (1200, "xfx"),
    ";": (1100, "xfy"),
    "->": (1050, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "\\=": (700, "xfx"),
    "is": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "#": (500, "yfx"),
    "/\\": (500, "yfx"),
    "\\/": (500, "yfx"),
    "*": (400, "yfx"),
    "/": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
}

PREFIX_OPS: Dict[str, Tuple[int, str]] = {
    ":-": (1200, "fx"),
    "\\+": (900, "fy"),
    "-": (200, "fy"),
    "\\": (200, "fy"),
}


# =============================================================================
# TERM REPRESENTATION
# =============================================================================

class Term:
    """Base of all term nodes. `key` is the principal functor used for dispatch."""
    __slots__ = ("node_id",)
    args: tuple = ()

    def __repr__(self) -> str:
        return format_term(self)


class Var(Term):
    __slots__ = ("name",)
    key = None

    def __init__(self, node_id: int, name: Optional[str] = None):
        self.node_id = node_id
        self.name = name


class Atom(Term):
    __slots__ = ("name", "key")

    def __init__(self, node_id: int, name: str):
        self.node_id = node_id
        self.name = name
        self.key = (name, 0)


class Int(Term):
    __slots__ = ("value", "key")

    def __init__(self, node_id: int, value: int):
        self.node_id = node_id
        self.value = value
        self.key = (value, -1)


class Float(Term):
    __slots__ = ("value", "key")

    def __init__(self, node_id: int, value: float):
        self.node_id = node_id
        self.value = value
        self.key = (value, -2)


class Struct(Term):
    __slots__ = ("functor", "args", "key")

    def __init__(self, node_id: int, functor: str, args: tuple):
        self.node_id = node_id
        self.functor = functor
        self.args = args
        self.key = (functor, len(args))

    @property
    def name(self) -> str:
        return self.functor


def arity(term: Term) -> int:
    return len(term.args)


def functor_label(key) -> str:
    """Human-readable `f/n` form of a dispatch key."""
    value, tag = key
    if tag == -1 or tag == -2:
        return f"{value}/0"
    return f"{quote_atom(value)}/{tag}"


def check_int_range(value: int) -> int:
    if value < INT_MIN or value > INT_MAX:
        raise EvaluationError(f"integer overflow: {value}", details={"value": str(value)})
    return value


class NodeIds:
    """Monotone node-id allocator; one per engine."""
    __slots__ = ("_next",)

    def __init__(self, start: int = 1):
        self._next = start

    def __call__(self) -> int:
        n = self._next
        self._next = n + 1
        return n

    @property
    def watermark(self) -> int:
        """The id the next allocated node will get."""
        return self._next


class TermFactory:
    """Builds terms whose node ids come from one allocator."""

    def __init__(self, ids: Optional[NodeIds] = None):
        self.ids = ids or NodeIds()

    def var(self, name: Optional[str] = None) -> Var:
        return Var(self.ids(), name)

    def atom(self, name: str) -> Atom:
        return Atom(self.ids(), name)

    def integer(self, value: int) -> Int:
        return Int(self.ids(), check_int_range(value))

    def flt(self, value: float) -> Float:
        return Float(self.ids(), value)

    def struct(self, functor: str, args: Iterable[Term]) -> Term:
        args = tuple(args)
        if not args:
            return self.atom(functor)
        return Struct(self.ids(), functor, args)

    def list_of(self, items: Iterable[Term], tail: Optional[Term] = None) -> Term:
        result = tail if tail is not None else self.atom(NIL)
        for item in reversed(list(items)):
            result = Struct(self.ids(), LIST_FUNCTOR, (item, result))
        return result

    def from_python(self, value) -> Term:
        """Convert ints, floats, strings (atoms) and lists; terms pass through."""
        if isinstance(value, Term):
            return value
        if isinstance(value, bool):
            raise TypeError("booleans have no term form")
        if isinstance(value, int):
            return self.integer(value)
        if isinstance(value, float):
            return self.flt(value)
        if isinstance(value, str):
            return self.atom(value)
        if isinstance(value, (list, tuple)):
            return self.list_of(self.from_python(v) for v in value)
        raise TypeError(f"no term form for {type(value).__name__}")


# =============================================================================
# BINDING STORE
# =============================================================================

@dataclass(frozen=True)
class UndoEvent:
    """Bindings undone by backtracking to an epoch.

    `unbound` holds the variable ids that lost their binding; `watermark` is
    the first node id allocated after the epoch was issued.
    """
    unbound: frozenset
    watermark: int

    @property
    def conditional(self) -> frozenset:
        """Undone variables that existed before the epoch."""
        return frozenset(v for v in self.unbound if v < self.watermark)


@dataclass(frozen=True)
class ResetEvent:
    """The store was emptied for a new query."""
    pass


class BindingStore:
    """The store of variable bindings with trail-based undo.

    Epochs are issued by `mark()` and form a stack: undoing to an epoch
    discards every newer epoch but keeps the target one alive.
    """

    def __init__(self, factory: Optional[TermFactory] = None, occurs_check: bool = False):
        self.make = factory or TermFactory()
        self.occurs_check = occurs_check
        self._bindings: Dict[int, Term] = {}
        self._trail: List[int] = []
        self._epochs: Dict[int, Tuple[int, int]] = {}
        self._epoch_stack: List[int] = []
        self._next_epoch = 1
        self._listeners: List[Callable] = []

    def subscribe(self, listener: Callable) -> None:
        self._listeners.append(listener)

    def _fire(self, event) -> None:
        for listener in self._listeners:
            listener(event)

    @property
    def bindings(self) -> Dict[int, Term]:
        return dict(self._bindings)

    def __len__(self) -> int:
        return len(self._bindings)

    def deref(self, term: Term) -> Term:
        bindings = self._bindings
        while type(term) is Var:
            bound = bindings.get(term.node_id)
            if bound is None:
                return term
            term = bound
        return term

    def is_bound(self, var: Var) -> bool:
        return var.node_id in self._bindings

    def bind(self, var: Var, term: Term) -> None:
        if var.node_id in self._bindings:
            raise InternalError(f"variable {var.node_id} is already bound")
        self._bindings[var.node_id] = term
        self._trail.append(var.node_id)

    def unify(self, a: Term, b: Term) -> bool:
        return unify(a, b, self)

    # Epochs -----------------------------------------------------------------

    def mark(self) -> int:
        epoch = self._next_epoch
        self._next_epoch += 1
        self._epochs[epoch] = (len(self._trail), self.make.ids.watermark)
        self._epoch_stack.append(epoch)
        return epoch

    def trail_length(self) -> int:
        return len(self._trail)

    def undo_to_epoch(self, epoch: int) -> None:
        entry = self._epochs.get(epoch)
        if entry is None:
            raise InternalError(f"unknown epoch {epoch}")
        stack = self._epoch_stack
        while stack[-1] != epoch:
            del self._epochs[stack.pop()]
        trail_length, watermark = entry
        unbound = self._undo(trail_length)
        if unbound:
            self._fire(UndoEvent(frozenset(unbound), watermark))

    def release(self, epoch: int) -> None:
        """Forget `epoch` and every newer epoch without undoing anything."""
        if epoch not in self._epochs:
            raise InternalError(f"unknown epoch {epoch}")
        stack = self._epoch_stack
        while stack:
            top = stack.pop()
            del self._epochs[top]
            if top == epoch:
                break

    def _undo(self, trail_length: int) -> List[int]:
        trail = self._trail
        bindings = self._bindings
        unbound = trail[trail_length:]
        for var_id in unbound:
            del bindings[var_id]
        del trail[trail_length:]
        return unbound

    def undo_silently(self, trail_length: int) -> None:
        """Drop bindings made since `trail_length` with no event (failed unify)."""
        self._undo(trail_length)

    def reset(self) -> None:
        self._bindings.clear()
        self._trail.clear()
        self._epochs.clear()
        self._epoch_stack.clear()
        self._fire(ResetEvent())


# =============================================================================
# UNIFICATION AND TRAVERSALS
# =============================================================================

def occurs_in(var: Var, term: Term, store: BindingStore) -> bool:
    stack = [term]
    deref = store.deref
    target = var.node_id
    while stack:
        t = deref(stack.pop())
        if type(t) is Var:
            if t.node_id == target:
                return True
        elif type(t) is Struct:
            stack.extend(t.args)
    return False


def unify(t1: Term, t2: Term, store: BindingStore, occurs_check: Optional[bool] = None) -> bool:
    """Unify two terms; on failure the store is left exactly as it was."""
    if occurs_check is None:
        occurs_check = store.occurs_check
    start = len(store._trail)
    deref = store.deref
    bind = store.bind
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a = deref(a)
        b = deref(b)
        if a is b:
            continue
        ta = type(a)
        tb = type(b)
        if ta is Var:
            if tb is Var:
                # younger variable points at the older one
                if a.node_id > b.node_id:
                    bind(a, b)
                else:
                    bind(b, a)
                continue
            if occurs_check and occurs_in(a, b, store):
                store.undo_silently(start)
                return False
            bind(a, b)
            continue
        if tb is Var:
            if occurs_check and occurs_in(b, a, store):
                store.undo_silently(start)
                return False
            bind(b, a)
            continue
        if a.key != b.key:
            store.undo_silently(start)
            return False
        if ta is Struct:
            stack.extend(zip(reversed(a.args), reversed(b.args)))
    return True


def copy_term(term: Term, make: TermFactory, mapping: Optional[Dict[int, Term]] = None,
              store: Optional[BindingStore] = None) -> Term:
    """Copy `term` with fresh node ids.

    Variables are replaced through `mapping` (node id to term); unmapped
    variables get fresh copies which are added to `mapping`. With a store,
    bound variables are dereferenced first.
    """
    if mapping is None:
        mapping = {}
    deref = store.deref if store is not None else None
    nodes: List[Term] = []
    children: Dict[int, List[int]] = {}
    stack = [(term, -1)]
    while stack:
        t, parent = stack.pop()
        if deref is not None:
            t = deref(t)
        index = len(nodes)
        nodes.append(t)
        if parent >= 0:
            children[parent].append(index)
        if type(t) is Struct:
            children[index] = []
            for arg in reversed(t.args):
                stack.append((arg, index))
    for t in nodes:
        if type(t) is Var and t.node_id not in mapping:
            mapping[t.node_id] = make.var(t.name)
    results: List[Optional[Term]] = [None] * len(nodes)
    ids = make.ids
    for index in range(len(nodes) - 1, -1, -1):
        t = nodes[index]
        kind = type(t)
        if kind is Var:
            results[index] = mapping[t.node_id]
        elif kind is Struct:
            results[index] = Struct(ids(), t.functor, tuple(results[c] for c in children[index]))
        elif kind is Atom:
            results[index] = Atom(ids(), t.name)
        elif kind is Int:
            results[index] = Int(ids(), t.value)
        else:
            results[index] = Float(ids(), t.value)
    return results[0]


def is_ground(term: Term, store: Optional[BindingStore] = None) -> bool:
    stack = [term]
    while stack:
        t = stack.pop()
        if store is not None:
            t = store.deref(t)
        if type(t) is Var:
            return False
        if type(t) is Struct:
            stack.extend(t.args)
    return True


def term_vars(term: Term, store: Optional[BindingStore] = None) -> List[Var]:
    """Unbound variables of `term` in left-to-right order, without duplicates."""
    seen = set()
    result = []
    stack = [term]
    while stack:
        t = stack.pop()
        if store is not None:
            t = store.deref(t)
        if type(t) is Var:
            if t.node_id not in seen:
                seen.add(t.node_id)
                result.append(t)
        elif type(t) is Struct:
            stack.extend(reversed(t.args))
    return result


def term_node_ids(term: Term, store: Optional[BindingStore] = None) -> set:
    """Every node id reachable from `term`, bound variables included."""
    seen = set()
    stack = [term]
    while stack:
        t = stack.pop()
        if t.node_id in seen:
            continue
        seen.add(t.node_id)
        if type(t) is Var:
            if store is not None:
                bound = store._bindings.get(t.node_id)
                if bound is not None:
                    stack.append(bound)
        elif type(t) is Struct:
            stack.extend(t.args)
    return seen


def variant(a: Term, b: Term, store: Optional[BindingStore] = None) -> bool:
    """Structural equality up to a consistent renaming of variables."""
    left: Dict[int, int] = {}
    right: Dict[int, int] = {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if store is not None:
            x = store.deref(x)
            y = store.deref(y)
        if type(x) is Var or type(y) is Var:
            if type(x) is not Var or type(y) is not Var:
                return False
            if left.setdefault(x.node_id, y.node_id) != y.node_id:
                return False
            if right.setdefault(y.node_id, x.node_id) != x.node_id:
                return False
            continue
        if x.key != y.key or type(x) is not type(y):
            return False
        if type(x) is Struct:
            stack.extend(zip(x.args, y.args))
    return True


def list_items(term: Term, store: Optional[BindingStore] = None) -> Tuple[List[Term], Term]:
    """Split a list into its items and its tail."""
    items = []
    t = store.deref(term) if store is not None else term
    while type(t) is Struct and t.key == (LIST_FUNCTOR, 2):
        items.append(t.args[0])
        t = t.args[1]
        if store is not None:
            t = store.deref(t)
    return items, t


def to_python(term: Term, store: Optional[BindingStore] = None):
    """Ground lists, numbers and atoms back to Python values."""
    t = store.deref(term) if store is not None else term
    if type(t) is Int or type(t) is Float:
        return t.value
    if type(t) is Atom:
        return [] if t.name == NIL else t.name
    items, tail = list_items(t, store)
    if items and type(tail) is Atom and tail.name == NIL:
        return [to_python(item, store) for item in items]
    raise TypeError(f"no Python form for {format_term(t, store)}")


# =============================================================================
# PRINTING
# =============================================================================

_PLAIN_ATOM = re.compile(r"^[a-z][a-zA-Z0-9_]*$")
_SYMBOL_ATOM = re.compile(r"^[+\-*/\\^<>=~:.?@#&$]+$")


def quote_atom(name: str) -> str:
    if name != "." and (_PLAIN_ATOM.match(name) or _SYMBOL_ATOM.match(name) or name in (NIL, "!", ";")):
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "''").replace("\n", "\\n")
    return f"'{escaped}'"


def _format_float(value: float) -> str:
    text = repr(value)
    if "." not in text and "e" not in text:
        return text + ".0"
    if "e" in text and "." not in text:
        mantissa, exponent = text.split("e")
        return f"{mantissa}.0e{exponent}"
    return text


class _Printer:
    def __init__(self, store: Optional[BindingStore], names: Optional[Dict[int, str]], quoted: bool):
        self.store = store
        self.names = names or {}
        self.quoted = quoted

    def atom(self, name: str) -> str:
        return quote_atom(name) if self.quoted else name

    def fmt(self, t: Term, max_prec: int = 1200) -> str:
        if self.store is not None:
            t = self.store.deref(t)
        kind = type(t)
        if kind is Var:
            name = self.names.get(t.node_id)
            if name is not None:
                return name
            if t.name and t.name != "_":
                return t.name
            return f"_G{t.node_id}"
        if kind is Int:
            return str(t.value)
        if kind is Float:
            return _format_float(t.value)
        if kind is Atom:
            return self.atom(t.name)
        functor = t.functor
        args = t.args
        if functor == LIST_FUNCTOR and len(args) == 2:
            return self.fmt_list(t)
        if len(args) == 2 and functor in INFIX_OPS:
            prec, kind_ = INFIX_OPS[functor]
            left_max = prec if kind_ == "yfx" else prec - 1
            right_max = prec if kind_ == "xfy" else prec - 1
            left = self.fmt(args[0], left_max)
            right = self.fmt(args[1], right_max)
            if functor == ",":
                text = f"{left}, {right}"
            else:
                text = f"{left} {self.atom(functor)} {right}"
            return f"({text})" if prec > max_prec else text
        if len(args) == 1 and functor in PREFIX_OPS and functor != ":-":
            prec, kind_ = PREFIX_OPS[functor]
            arg = self.store.deref(args[0]) if self.store is not None else args[0]
            if type(arg) in (Int, Float) or (type(arg) is Atom and arg.name in INFIX_OPS):
                return f"{self.atom(functor)}({self.fmt(arg, 999)})"
            inner = self.fmt(arg, prec if kind_ == "fy" else prec - 1)
            sep = " " if functor == "\\+" or inner[:1] in "+-*/\\^<>=~:.?@#&$" else ""
            text = f"{self.atom(functor)}{sep}{inner}"
            return f"({text})" if prec > max_prec else text
        inner = ", ".join(self.fmt(a, 999) for a in args)
        return f"{self.atom(functor)}({inner})"

    def fmt_list(self, t: Term) -> str:
        parts = []
        while True:
            if self.store is not None:
                t = self.store.deref(t)
            if type(t) is Struct and t.key == (LIST_FUNCTOR, 2):
                parts.append(self.fmt(t.args[0], 999))
                t = t.args[1]
                continue
            break
        if type(t) is Atom and t.name == NIL:
            return "[" + ", ".join(parts) + "]"
        return "[" + ", ".join(parts) + "|" + self.fmt(t, 999) + "]"


def format_term(term: Term, store: Optional[BindingStore] = None,
                names: Optional[Dict[int, str]] = None, quoted: bool = True,
                max_prec: int = 1200) -> str:
    """Print a term in source syntax."""
    return _Printer(store, names, quoted).fmt(term, max_prec)
