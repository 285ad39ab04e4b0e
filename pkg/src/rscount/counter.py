"""Exact model counting.

:func:`count_models` is a DPLL-style #SAT search: unit propagation, then the
residual clauses are split into variable-disjoint components, each counted
separately and memoized by its exact residual clause set. There is no
clause learning. :func:`count_exhaustive` is the brute-force oracle.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import BudgetExceeded, CapacityError
from .formula import CnfFormula

MOST_FREQUENT = "most-frequent"
FIXED_ORDER = "fixed-order"


@dataclass(frozen=True)
class CounterConfig:
    branching: str = MOST_FREQUENT
    component_caching: bool = True
    # components with at most this many variables are counted by enumeration
    exhaustive_fallback_threshold: int = 6
    max_decisions: int | None = None

    def __post_init__(self):
        if self.branching not in (MOST_FREQUENT, FIXED_ORDER):
            raise ValueError(f"unknown branching heuristic {self.branching!r}")
        if self.exhaustive_fallback_threshold < 0:
            raise ValueError("threshold must be non-negative")


@dataclass
class CountStats:
    decisions: int = 0
    propagations: int = 0
    cache_hits: int = 0
    cached_components: int = 0
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return {
            "decisions": self.decisions,
            "propagations": self.propagations,
            "cache_hits": self.cache_hits,
            "cached_components": self.cached_components,
            "wall_time_ms": round(self.wall_time * 1000, 3),
        }


@dataclass(frozen=True)
class ModelCount:
    value: int
    stats: CountStats = field(default_factory=CountStats, compare=False)

    def __int__(self):
        return self.value


Clauses = tuple  # tuple of sorted literal tuples


def _clause_vars(clauses: Iterable[tuple[int, ...]]) -> set[int]:
    return {abs(l) for c in clauses for l in c}


class _Search:
    def __init__(self, cfg: CounterConfig):
        self.cfg = cfg
        self.stats = CountStats()
        self.cache: dict[Clauses, int] = {}

    # residual formulas are lists of sorted clause tuples, never containing an empty clause

    def propagate(self, clauses: list[tuple[int, ...]]) -> tuple[list[tuple[int, ...]], set[int]] | None:
        """Unit-propagate to fixpoint; returns (residual, assigned vars) or None on conflict."""
        assigned: set[int] = set()
        while True:
            units = {c[0] for c in clauses if len(c) == 1}
            if not units:
                return clauses, assigned
            if any(-u in units for u in units):
                return None
            self.stats.propagations += len(units)
            assigned.update(abs(u) for u in units)
            out = []
            for c in clauses:
                if any(l in units for l in c):
                    continue
                if any(-l in units for l in c):
                    c = tuple(l for l in c if -l not in units)
                    if not c:
                        return None
                out.append(c)
            clauses = out

    def count(self, clauses: list[tuple[int, ...]], scope: set[int]) -> int:
        """Models of ``clauses`` over the variables in ``scope``."""
        res = self.propagate(clauses)
        if res is None:
            return 0
        clauses, assigned = res
        live = _clause_vars(clauses)
        free = len(scope) - len(assigned & scope) - len(live)
        total = 1 << free
        if not clauses:
            return total
        for comp in _components(clauses):
            n = self.count_component(comp)
            if n == 0:
                return 0
            total *= n
        return total

    def count_component(self, comp: list[tuple[int, ...]]) -> int:
        key = None
        if self.cfg.component_caching:
            key = tuple(sorted(comp))
            hit = self.cache.get(key)
            if hit is not None:
                self.stats.cache_hits += 1
                return hit
        scope = _clause_vars(comp)
        if len(scope) <= self.cfg.exhaustive_fallback_threshold:
            n = _enumerate_small(comp, sorted(scope))
        else:
            v = self.pick(comp)
            self.stats.decisions += 1
            cap = self.cfg.max_decisions
            if cap is not None and self.stats.decisions > cap:
                raise BudgetExceeded(f"decision budget of {cap} exhausted", self.stats)
            rest = scope - {v}
            n = 0
            for lit in (v, -v):
                sub = _condition(comp, lit)
                if sub is not None:
                    n += self.count(sub, rest)
        if key is not None:
            self.cache[key] = n
            self.stats.cached_components += 1
        return n

    def pick(self, comp: list[tuple[int, ...]]) -> int:
        if self.cfg.branching == FIXED_ORDER:
            return min(abs(l) for c in comp for l in c)
        freq: dict[int, int] = {}
        for c in comp:
            for l in c:
                v = abs(l)
                freq[v] = freq.get(v, 0) + 1
        # ties go to the smallest index
        return max(freq, key=lambda v: (freq[v], -v))


def _condition(clauses: list[tuple[int, ...]], lit: int) -> list[tuple[int, ...]] | None:
    out = []
    for c in clauses:
        if lit in c:
            continue
        if -lit in c:
            c = tuple(l for l in c if l != -lit)
            if not c:
                return None
        out.append(c)
    return out


def _components(clauses: list[tuple[int, ...]]) -> list[list[tuple[int, ...]]]:
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for c in clauses:
        first = abs(c[0])
        parent.setdefault(first, first)
        r = find(first)
        for l in c[1:]:
            v = abs(l)
            if v not in parent:
                parent[v] = r
            else:
                rv = find(v)
                if rv != r:
                    parent[rv] = r
    groups: dict[int, list[tuple[int, ...]]] = {}
    for c in clauses:
        groups.setdefault(find(abs(c[0])), []).append(c)
    return sorted(groups.values(), key=lambda g: min(abs(l) for c in g for l in c))


def _enumerate_small(clauses: list[tuple[int, ...]], variables: list[int]) -> int:
    pos = {v: i for i, v in enumerate(variables)}
    n = len(variables)
    count = 0
    for mask in range(1 << n):
        if all(any(((mask >> pos[abs(l)]) & 1) == (l > 0) for l in c) for c in clauses):
            count += 1
    return count


def count_models(f: CnfFormula, cfg: CounterConfig | None = None) -> ModelCount:
    """Exact number of satisfying assignments over all ``f.num_variables`` variables."""
    cfg = cfg or CounterConfig()
    t0 = time.perf_counter()
    clauses = []
    for c in f.clauses:
        lits = set(c)
        if any(-l in lits for l in lits):
            continue  # tautology
        clauses.append(tuple(sorted(lits)))
    search = _Search(cfg)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * f.num_variables + 1000))
    try:
        value = search.count(clauses, set(range(1, f.num_variables + 1)))
    finally:
        sys.setrecursionlimit(limit)
        search.stats.wall_time = time.perf_counter() - t0
    return ModelCount(value, search.stats)


def count_exhaustive(f: CnfFormula, max_variables: int = 26, chunk: int = 1 << 18) -> ModelCount:
    """Brute-force count over all ``2**n`` assignments."""
    n = f.num_variables
    if n > max_variables:
        raise CapacityError("too many variables for exhaustive counting", n, max_variables)
    t0 = time.perf_counter()
    total = 1 << n
    count = 0
    for start in range(0, total, chunk):
        rows = np.arange(start, min(start + chunk, total), dtype=np.int64)
        ok = np.ones(len(rows), dtype=bool)
        for c in f.clauses:
            sat = np.zeros(len(rows), dtype=bool)
            for l in c:
                bit = ((rows >> (abs(l) - 1)) & 1).astype(bool)
                sat |= bit if l > 0 else ~bit
            ok &= sat
            if not ok.any():
                break
        count += int(ok.sum())
    return ModelCount(count, CountStats(wall_time=time.perf_counter() - t0))
