"""
Memocheck Check Cache

This module provides the bounded store of verified (node-id, type-id) facts
used by the checker: LRU and direct-mapped replacement, depth-gated
insertion, invalidation on backtracking, and the debug audits that compare
resident facts against the uncached recognizer.
"""

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .errors import CacheAuditError, ConfigurationError, get_debug_context
from .performance import CacheStats
from .terms import BindingStore, ResetEvent, Struct, Term, UndoEvent, format_term, term_node_ids

CacheKey = Tuple[int, int]


class CachePolicy(str, Enum):
    LRU = "lru"
    DIRECT_MAPPED = "dm"
    NONE = "none"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str) and value.lower().replace("_", "-") == "direct-mapped":
            return cls.DIRECT_MAPPED
        return None


class InvalidationMode(str, Enum):
    FLUSH_ALL = "flush"
    TRAIL_SELECTIVE = "trail"


INFINITE_DEPTH = ("inf", "infinite", "none", "")


def parse_depth_limit(value) -> Optional[int]:
    """`None`, "inf" and friends mean no limit; anything else must be a positive integer."""
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip().lower()
        if text in INFINITE_DEPTH:
            return None
        try:
            value = int(text)
        except ValueError:
            raise ConfigurationError(f"depth limit must be a positive integer or 'inf': {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigurationError(f"depth limit must be a positive integer or 'inf': {value!r}")
    return value


class CacheConfig(BaseModel):
    """Replacement policy, size, depth threshold and invalidation mode of one cache."""
    model_config = ConfigDict(frozen=True)

    policy: CachePolicy = Field(default=CachePolicy.LRU, description="Replacement policy")
    capacity: int = Field(default=256, ge=0, description="Number of entries")
    depth_limit: Optional[int] = Field(default=2, description="Checks at this depth or deeper are not cached")
    invalidation: InvalidationMode = Field(default=InvalidationMode.FLUSH_ALL,
                                           description="What backtracking removes")

    @field_validator("depth_limit", mode="before")
    @classmethod
    def _depth_limit(cls, value):
        try:
            return parse_depth_limit(value)
        except ConfigurationError as exc:
            raise ValueError(exc.message) from None

    @property
    def label(self) -> str:
        if self.policy is CachePolicy.NONE:
            return "none"
        depth = "inf" if self.depth_limit is None else self.depth_limit
        return f"{self.policy.value}-{self.capacity}/d{depth}"

    def admits(self, depth: int) -> bool:
        return self.depth_limit is None or depth < self.depth_limit


# =============================================================================
# CACHE IMPLEMENTATIONS
# =============================================================================

class CheckCache:
    """Common bookkeeping: statistics, depth gating, invalidation and audits.

    Subclasses provide `_find`, `_store`, `_remove`, `_clear`, `resident`
    and `__len__`.
    """

    policy: CachePolicy = CachePolicy.NONE

    def __init__(self, config: CacheConfig, stats: Optional[CacheStats] = None,
                 chaos_rate: float = 0.0, chaos_seed: int = 0):
        self.config = config
        self.capacity = config.capacity
        self.depth_limit = config.depth_limit
        self.stats = stats if stats is not None else CacheStats()
        self.trail_mode = config.invalidation is InvalidationMode.TRAIL_SELECTIVE
        # node id -> ids of the nodes whose cached facts were derived through it
        self._parents: Dict[int, Set[int]] = {}
        self._link_floor = 4 * config.capacity + 64
        self._link_limit = self._link_floor
        self._chaos = random.Random(chaos_seed) if chaos_rate > 0 else None
        self._chaos_rate = chaos_rate
        self._debug = get_debug_context()

    # Subclass hooks -----------------------------------------------------------

    def _find(self, key: CacheKey) -> bool:
        return False

    def _store(self, key: CacheKey, term: Optional[Term]) -> bool:
        return False

    def _remove(self, key: CacheKey) -> None:
        pass

    def _clear(self) -> None:
        pass

    def resident(self) -> List[Tuple[CacheKey, Optional[Term]]]:
        return []

    def __len__(self) -> int:
        return 0

    # Public operations -----------------------------------------------------

    def lookup(self, node_id: int, type_id: int) -> bool:
        if self._chaos is not None and self._chaos.random() < self._chaos_rate:
            self.flush("chaos")
        self.stats.lookups += 1
        if self._find((node_id, type_id)):
            self.stats.hits += 1
            return True
        return False

    def insert(self, node_id: int, type_id: int, depth: int = 0, term: Optional[Term] = None) -> bool:
        """Record a verified fact unless `depth` is at or beyond the depth limit."""
        if self.depth_limit is not None and depth >= self.depth_limit:
            return False
        if self._store((node_id, type_id), term):
            self.stats.insertions += 1
            return True
        return False

    def link(self, child_id: int, parent_id: int) -> None:
        """Note that facts about `parent_id` were derived through `child_id`."""
        parents = self._parents.get(child_id)
        if parents is None:
            self._parents[child_id] = {parent_id}
        else:
            parents.add(parent_id)

    @property
    def link_count(self) -> int:
        return len(self._parents)

    def compact_links(self) -> None:
        """Prune the link map once it outgrows the cache; call between checks only."""
        if len(self._parents) > self._link_limit:
            self._prune_links()

    def _prune_links(self) -> None:
        """Keep only links on some path to a resident entry."""
        children: Dict[int, List[int]] = {}
        for child, parents in self._parents.items():
            for parent in parents:
                children.setdefault(parent, []).append(child)
        live = {key[0] for key in self.entries()}
        queue = list(live)
        while queue:
            for child in children.get(queue.pop(), ()):
                if child not in live:
                    live.add(child)
                    queue.append(child)
        pruned = {}
        for child, parents in self._parents.items():
            if child in live:
                kept = {p for p in parents if p in live}
                if kept:
                    pruned[child] = kept
        self._parents = pruned
        self._link_limit = max(self._link_floor, 2 * len(pruned))

    def entries(self) -> List[CacheKey]:
        return [key for key, _ in self.resident()]

    def __contains__(self, key: CacheKey) -> bool:
        return key in set(self.entries())

    def flush(self, reason: str = "flush", always_count: bool = False) -> int:
        dropped = len(self)
        self._clear()
        if dropped or always_count:
            self.stats.flushes += 1
            self._debug.log_cache(reason, dropped=dropped)
        return dropped

    def invalidate(self, event) -> int:
        """React to a store event; returns the number of entries dropped."""
        if isinstance(event, ResetEvent):
            dropped = len(self)
            self._clear()
            self._parents.clear()
            return dropped
        if not isinstance(event, UndoEvent):
            return 0
        if self.trail_mode:
            return self._invalidate_selective(event)
        return self.flush("backtrack", always_count=self.capacity > 0)

    def _invalidate_selective(self, event: UndoEvent) -> int:
        affected = set()
        queue = list(event.unbound)
        while queue:
            node = queue.pop()
            if node in affected:
                continue
            affected.add(node)
            queue.extend(self._parents.get(node, ()))
        stale = [key for key in self.entries() if key[0] in affected]
        for key in stale:
            self._remove(key)
        for var_id in event.unbound:
            self._parents.pop(var_id, None)
        if stale:
            self.stats.flushes += 1
            self._debug.log_cache("selective", dropped=len(stale), unbound=len(event.unbound))
        return len(stale)

    def audit(self, store: BindingStore, table) -> None:
        """Raise CacheAuditError if a resident fact no longer holds."""
        from .automata import brute_force_recognize

        for (node_id, type_id), term in self.resident():
            if term is None:
                continue
            if not brute_force_recognize(term, type_id, table, store):
                raise CacheAuditError(
                    f"cached fact {table.name(type_id)}({format_term(term, store)}) does not hold",
                    details={"node_id": node_id, "type_id": type_id})


class NullCache(CheckCache):
    """Policy none: every lookup misses and inserts do nothing."""
    policy = CachePolicy.NONE

    def insert(self, node_id: int, type_id: int, depth: int = 0, term: Optional[Term] = None) -> bool:
        return False

    def link(self, child_id: int, parent_id: int) -> None:
        pass


class _LruEntry:
    """Entry in the recency list."""
    __slots__ = ("prev", "nxt", "key", "term")

    def __init__(self, key: CacheKey, term: Optional[Term]):
        self.prev = None
        self.nxt = None
        self.key = key
        self.term = term


class LruCache(CheckCache):
    """Fully associative cache; the least recently used entry sits first."""
    policy = CachePolicy.LRU

    def __init__(self, config: CacheConfig, stats: Optional[CacheStats] = None, **kwargs):
        super().__init__(config, stats, **kwargs)
        self.items: Dict[CacheKey, _LruEntry] = {}
        self.first: Optional[_LruEntry] = None
        self.last: Optional[_LruEntry] = None

    def _link(self, prev, nxt):
        if prev is None:
            self.first = nxt
        else:
            prev.nxt = nxt
        if nxt is None:
            self.last = prev
        else:
            nxt.prev = prev

    def _append(self, entry: _LruEntry):
        entry.nxt = None
        self._link(self.last, entry)
        self.last = entry

    def _touch(self, entry: _LruEntry):
        if entry is self.last:
            return
        self._link(entry.prev, entry.nxt)
        self._append(entry)

    def _find(self, key: CacheKey) -> bool:
        entry = self.items.get(key)
        if entry is None:
            return False
        self._touch(entry)
        return True

    def _store(self, key: CacheKey, term: Optional[Term]) -> bool:
        if self.capacity == 0:
            return False
        entry = self.items.get(key)
        if entry is not None:
            entry.term = term
            self._touch(entry)
            return False
        entry = _LruEntry(key, term)
        self.items[key] = entry
        self._append(entry)
        if len(self.items) > self.capacity:
            first = self.first
            del self.items[first.key]
            self._link(None, first.nxt)
            self.stats.evictions += 1
        return True

    def _remove(self, key: CacheKey) -> None:
        entry = self.items.pop(key, None)
        if entry is not None:
            self._link(entry.prev, entry.nxt)

    def _clear(self) -> None:
        self.items.clear()
        self.first = None
        self.last = None

    def resident(self) -> List[Tuple[CacheKey, Optional[Term]]]:
        """Entries from least to most recently used."""
        out = []
        entry = self.first
        while entry is not None:
            out.append((entry.key, entry.term))
            entry = entry.nxt
        return out

    def __len__(self) -> int:
        return len(self.items)


class DirectMappedCache(CheckCache):
    """One slot per `node_id % capacity`; collisions overwrite."""
    policy = CachePolicy.DIRECT_MAPPED

    def __init__(self, config: CacheConfig, stats: Optional[CacheStats] = None, **kwargs):
        super().__init__(config, stats, **kwargs)
        self.slots: List[Optional[Tuple[CacheKey, Optional[Term]]]] = [None] * config.capacity
        self._size = 0

    def slot_of(self, node_id: int) -> int:
        return node_id % self.capacity

    def _find(self, key: CacheKey) -> bool:
        if not self.capacity:
            return False
        held = self.slots[key[0] % self.capacity]
        return held is not None and held[0] == key

    def _store(self, key: CacheKey, term: Optional[Term]) -> bool:
        if not self.capacity:
            return False
        slot = key[0] % self.capacity
        held = self.slots[slot]
        if held is not None and held[0] == key:
            self.slots[slot] = (key, term)
            return False
        if held is None:
            self._size += 1
        else:
            self.stats.evictions += 1
        self.slots[slot] = (key, term)
        return True

    def _remove(self, key: CacheKey) -> None:
        if not self.capacity:
            return
        slot = key[0] % self.capacity
        held = self.slots[slot]
        if held is not None and held[0] == key:
            self.slots[slot] = None
            self._size -= 1

    def _clear(self) -> None:
        self.slots = [None] * self.capacity
        self._size = 0

    def resident(self) -> List[Tuple[CacheKey, Optional[Term]]]:
        return [held for held in self.slots if held is not None]

    def __len__(self) -> int:
        return self._size


def make_cache(config: CacheConfig, stats: Optional[CacheStats] = None,
               chaos_rate: float = 0.0, chaos_seed: int = 0) -> CheckCache:
    cls = {
        CachePolicy.LRU: LruCache,
        CachePolicy.DIRECT_MAPPED: DirectMappedCache,
        CachePolicy.NONE: NullCache,
    }[config.policy]
    return cls(config, stats, chaos_rate=chaos_rate, chaos_seed=chaos_seed)


# =============================================================================
# UPDATE AUDIT
# =============================================================================

@dataclass
class UpdateAudit:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _cacheable_subjects(props: Sequence[Term], table, store: BindingStore) -> Set[int]:
    regtypes = table.regtypes
    reachable: Set[int] = set()
    for prop in props:
        prop = store.deref(prop)
        if type(prop) is not Struct:
            continue
        cacheable = prop.key == ("ground", 1) or prop.key in regtypes
        if cacheable:
            reachable |= term_node_ids(prop.args[0], store)
    return reachable


def cache_update_semantics_check(props: Sequence[Term], store: BindingStore,
                                 before: Iterable[CacheKey],
                                 after: Mapping[CacheKey, Optional[Term]],
                                 table) -> UpdateAudit:
    """Every entry added while checking `props` must be a verified fact about
    a term reachable from the subject of one of the cacheable props.

    Dropped entries are always allowed.
    """
    from .automata import brute_force_recognize

    audit = UpdateAudit()
    old = set(before)
    reachable = _cacheable_subjects(props, table, store)
    for key, term in after.items():
        if key in old:
            continue
        node_id, type_id = key
        label = f"({node_id}, {table.name(type_id)})"
        if node_id not in reachable:
            audit.violations.append(f"entry {label} is not reachable from a checked prop")
            continue
        if term is None or not brute_force_recognize(term, type_id, table, store):
            audit.violations.append(f"entry {label} does not hold")
    return audit
