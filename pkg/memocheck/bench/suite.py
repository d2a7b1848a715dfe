"""
Memocheck Benchmark Suite

This module provides the benchmark registry: the seven insertion benchmarks
grouped by how their checking overhead behaves, the list-length sentinel,
loading of the bundled programs and seeded key generation.
"""

import random
from enum import Enum
from importlib import resources
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import ConfigurationError
from ..terms import Term, TermFactory

DEFAULT_SIZES: Tuple[int, ...] = (250, 500, 1000, 2000)


class Group(str, Enum):
    """Benchmark groups: a = list-like, b = balanced trees with cheap
    rebalancing, c = trees with structural rebalancing, d = plain trees."""
    A = "a"
    B = "b"
    C = "c"
    D = "d"
    SENTINEL = "sentinel"


class BenchSpec(BaseModel):
    """One benchmark: a bundled program, its entry predicate and the inputs."""
    model_config = ConfigDict(frozen=True)

    name: str
    group: Group
    program: str = Field(description="File name under memocheck/bench/programs")
    entry: str = Field(default="main", description="Entry predicate called as entry(Keys, Out)")
    sizes: Tuple[int, ...] = DEFAULT_SIZES
    seed: int = 0
    key_range: Optional[int] = Field(default=None, description="Keys are drawn from [0, key_range); default 4 * size")
    assertions: int = Field(default=0, description="Number of pred assertions in the program")
    regtypes: int = Field(default=0, description="Number of regtype declarations in the program")

    @field_validator("sizes")
    @classmethod
    def _sizes(cls, value):
        if not value or any(n < 1 for n in value):
            raise ValueError("benchmark sizes must be positive")
        return tuple(value)

    def with_inputs(self, sizes: Optional[Tuple[int, ...]] = None, seed: Optional[int] = None) -> "BenchSpec":
        update = {}
        if sizes is not None:
            update["sizes"] = tuple(sizes)
        if seed is not None:
            update["seed"] = seed
        return type(self)(**{**self.model_dump(), **update})

    def source(self) -> str:
        return load_source(self.program)

    def keys(self, size: int) -> List[int]:
        """Uniform random keys; the same (seed, size) always gives the same list."""
        rng = random.Random(self.seed * 1_000_003 + size)
        upper = self.key_range or 4 * size
        return [rng.randrange(upper) for _ in range(size)]

    def goal(self, keys: List[int], make: Optional[TermFactory] = None) -> Term:
        make = make or TermFactory()
        return make.struct(self.entry, [make.list_of(make.integer(k) for k in keys), make.var("_Out")])


def load_source(filename: str) -> str:
    try:
        return resources.files("memocheck.bench").joinpath("programs", filename).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigurationError(f"benchmark program {filename} is missing") from None


BENCHMARKS: Dict[str, BenchSpec] = {
    spec.name: spec for spec in (
        BenchSpec(name="amqueue", group=Group.A, program="amqueue.pl", assertions=4, regtypes=2),
        BenchSpec(name="set", group=Group.A, program="set.pl", key_range=64, assertions=4, regtypes=1),
        BenchSpec(name="avl-tree", group=Group.B, program="avl.pl", assertions=8, regtypes=2),
        BenchSpec(name="heap", group=Group.B, program="heap.pl", assertions=7, regtypes=2),
        BenchSpec(name="b-tree", group=Group.C, program="btree.pl", assertions=9, regtypes=3),
        BenchSpec(name="rb-tree", group=Group.C, program="rbtree.pl", assertions=15, regtypes=3),
        BenchSpec(name="tree", group=Group.D, program="tree.pl", assertions=2, regtypes=2),
    )
}

SENTINEL = BenchSpec(name="len", group=Group.SENTINEL, program="len.pl", entry="len",
                     sizes=(1000, 2000, 4000), assertions=1, regtypes=1)


def get_bench(name: str) -> BenchSpec:
    if name == SENTINEL.name:
        return SENTINEL
    try:
        return BENCHMARKS[name]
    except KeyError:
        known = ", ".join(sorted(BENCHMARKS) + [SENTINEL.name])
        raise ConfigurationError(f"unknown benchmark {name!r}; known: {known}") from None


def select(names: Optional[str]) -> List[BenchSpec]:
    """Benchmarks named in a comma-separated list; `all` or None gives the seven."""
    if names is None or names == "all":
        return list(BENCHMARKS.values())
    return [get_bench(n.strip()) for n in names.split(",") if n.strip()]
