"""
Memocheck Prop Checker

This module provides evaluation of prop literals against the binding store:
instantiation and primitive tests directly, regular types and ground/1
through the cached automaton walk.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .assertions import PropClass, PropLiteral, classify_prop
from .automata import FIRST_USER_STATE, GROUND, PRIMITIVE_STATES, TypeTable, brute_force_recognize, primitive_accepts
from .cache import CacheConfig, CheckCache, NullCache
from .errors import CacheAuditError, DefinitionError, get_debug_context
from .performance import CacheStats
from .terms import BindingStore, Struct, Term, Var, format_term, is_ground


@dataclass(frozen=True)
class CheckedProp:
    """A classified prop with its automaton state resolved.

    `subject` is the position of the subject among the head arguments when
    the prop comes from an assertion, or -1 for props built at run time.
    """
    name: str
    cls: PropClass
    type_id: int
    text: str
    subject: int = -1


def compile_prop(literal: PropLiteral, table: TypeTable, subject: int = -1) -> CheckedProp:
    """Classify `literal` and resolve the automaton state it checks."""
    cls = classify_prop(literal, table.regtypes)
    if cls is PropClass.NEVER:
        type_id = -2
    elif cls is PropClass.CHEAP:
        type_id = PRIMITIVE_STATES[literal.name]
    else:
        type_id = table.resolve_prop(literal.name, literal.type_args)
    return CheckedProp(literal.name, cls, type_id, literal.text, subject)


class PropChecker:
    """Evaluates props for one engine; owns nothing but shares the cache."""

    def __init__(self, store: BindingStore, table: TypeTable, cache: Optional[CheckCache] = None,
                 stats: Optional[CacheStats] = None, shadow: bool = False):
        self.store = store
        self.table = table
        self.cache = cache if cache is not None else NullCache(CacheConfig(), stats)
        self.stats = stats if stats is not None else self.cache.stats
        self.shadow = shadow
        self._sets = table.constructor_sets()
        self._compiled: Dict[Tuple[str, str], CheckedProp] = {}
        self._debug = get_debug_context()

    # Classification ----------------------------------------------------------

    def compile_literal(self, literal: PropLiteral, subject: int = -1) -> CheckedProp:
        return compile_prop(literal, self.table, subject)

    def compile_term(self, prop: Term) -> CheckedProp:
        prop = self.store.deref(prop)
        if type(prop) is not Struct:
            raise DefinitionError(f"not a prop literal: {format_term(prop, self.store)}")
        if len(prop.args) == 1:
            key = (prop.functor, "")
        else:
            key = (prop.functor, format_term(Struct(0, prop.functor, prop.args[1:]), self.store))
        found = self._compiled.get(key)
        if found is None:
            type_args = prop.args[1:]
            if not all(is_ground(a, self.store) for a in type_args):
                raise DefinitionError(f"type arguments of {format_term(prop, self.store)} must be ground")
            literal = PropLiteral(prop.functor, prop.args, format_term(prop, self.store))
            found = self.compile_literal(literal)
            self._compiled[key] = found
        return found

    # Evaluation --------------------------------------------------------------

    def evaluate(self, prop: CheckedProp, subject: Term) -> bool:
        """succeeds-trivially with the cache: `prop` applied to `subject`."""
        if prop.cls is PropClass.NEVER:
            return type(self.store.deref(subject)) is Var
        if prop.cls is PropClass.CHEAP:
            return primitive_accepts(prop.type_id, self.store.deref(subject))
        return self.reg_check(subject, prop.type_id)

    def succeeds_trivially_cached(self, prop: Term) -> bool:
        compiled = self.compile_term(prop)
        return self.evaluate(compiled, self.store.deref(prop).args[0])

    def succeeds_trivially(self, prop: Term) -> bool:
        """The same verdict computed without touching the cache."""
        compiled = self.compile_term(prop)
        subject = self.store.deref(prop).args[0]
        if compiled.cls is PropClass.NEVER:
            return type(self.store.deref(subject)) is Var
        if compiled.cls is PropClass.CHEAP:
            return primitive_accepts(compiled.type_id, self.store.deref(subject))
        return brute_force_recognize(subject, compiled.type_id, self.table, self.store)

    def check(self, prop: Term) -> bool:
        return self.succeeds_trivially_cached(prop)

    def reg_check(self, x: Term, t: int, d: int = 0) -> bool:
        """Check that the term at `x` has type `t`, caching verified
        subterms above the depth limit. Atomic values are never cached."""
        if self.cache.trail_mode:
            self.cache.compact_links()
        result, visits, deepest = self._walk(x, t, d)
        stats = self.stats
        stats.node_visits += visits
        stats.record_check_depth(deepest)
        if self.shadow:
            expected = brute_force_recognize(x, t, self.table, self.store)
            if expected != result:
                raise CacheAuditError(
                    f"cached check of {self.table.name(t)} on {format_term(x, self.store)} "
                    f"returned {result}, uncached {expected}",
                    details={"type_id": t})
        debug = self._debug
        if debug.trace_checks:
            debug.trace_check(f"{self.table.name(t)}({format_term(x, self.store)})", result, visits=visits)
        return result

    def _walk(self, x: Term, t: int, d: int) -> Tuple[bool, int, int]:
        bindings = self.store._bindings
        cache = self.cache
        lookup = cache.lookup
        insert = cache.insert
        link = cache.link if cache.trail_mode else None
        limit = cache.depth_limit
        sets = self._sets
        visits = 0
        deepest = d
        # frames of [node, state, depth, child states, index of child being checked]
        frames = []
        term, state, depth, parent = x, t, d, None
        while True:
            # visit one node ------------------------------------------------
            visits += 1
            if depth > deepest:
                deepest = depth
            while type(term) is Var:
                if link is not None and parent is not None:
                    link(term.node_id, parent.node_id)
                bound = bindings.get(term.node_id)
                if bound is None:
                    break
                term = bound
            if link is not None and parent is not None and type(term) is not Var:
                link(term.node_id, parent.node_id)
            children = None
            if state == GROUND:
                if type(term) is Var:
                    ok = False
                elif type(term) is not Struct:
                    ok = True
                elif lookup(term.node_id, GROUND):
                    ok = True
                else:
                    ok = True
                    children = (GROUND,) * len(term.args)
            elif state < FIRST_USER_STATE:
                ok = primitive_accepts(state, term)
            elif type(term) is Var:
                ok = False
            else:
                args = sets[state].get(term.key)
                if args is None:
                    ok = False
                elif not args:
                    ok = True
                elif lookup(term.node_id, state):
                    ok = True
                else:
                    ok = True
                    children = args
            if children is not None:
                frames.append([term, state, depth, children, 0])
                parent = term
                term, state, depth = term.args[0], children[0], depth + 1
                continue
            # unwind ----------------------------------------------------------
            while True:
                if not ok:
                    return False, visits, deepest
                if not frames:
                    return True, visits, deepest
                frame = frames[-1]
                frame[4] += 1
                node, node_state, node_depth, node_children, index = frame
                if index < len(node_children):
                    parent = node
                    term, state, depth = node.args[index], node_children[index], node_depth + 1
                    break
                frames.pop()
                if limit is None or node_depth < limit:
                    insert(node.node_id, node_state, node_depth, node)

    def ground_check(self, x: Term) -> bool:
        return self.reg_check(x, GROUND)

