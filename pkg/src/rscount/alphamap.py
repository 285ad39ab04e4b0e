"""Structured concept remappings and brute-force RS counting.

A structured map is stored as ``targets``: for every ground-truth bit
(column ``y`` of ``A``) the single predicted bit (row ``x``) it is routed
to, which is exactly a matrix ``A`` with one true entry per column. ``O`` is
derived: ``O[i, j]`` is set iff some value of ground-truth concept ``j`` is
routed into predicted concept ``i``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import cached_property
from math import factorial
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, KnowledgeError
from .formula import evaluate_batch
from .knowledge import (
    DEFAULT_ENUMERATION_BOUND,
    ConceptSpace,
    ConceptVector,
    Knowledge,
    Support,
    class_sizes,
    require_enumerable,
)

DEFAULT_ALPHA_CAP = 8**8


class StructureMode(str, enum.Enum):
    UNRESTRICTED = "unrestricted"
    COMPLETE = "complete"
    PERMUTATION = "permutation"


@dataclass(frozen=True)
class AlphaMap:
    space: ConceptSpace
    targets: tuple[int, ...]

    def __post_init__(self):
        if len(self.targets) != self.space.width:
            raise ValueError("need one target per ground-truth bit")
        if any(not 0 <= t < self.space.width for t in self.targets):
            raise ValueError("target out of range")

    @classmethod
    def from_matrix(cls, space: ConceptSpace, A) -> "AlphaMap":
        A = np.asarray(A, dtype=bool)
        if A.shape != (space.width, space.width):
            raise ValueError(f"A must be {space.width}x{space.width}")
        col_counts = A.sum(axis=0)
        if np.any(col_counts != 1):
            raise ValueError("every column of A needs exactly one true entry")
        return cls(space, tuple(int(x) for x in A.argmax(axis=0)))

    @classmethod
    def from_blocks(
        cls, space: ConceptSpace, routing: Sequence[int], functions: Sequence[Sequence[int]]
    ) -> "AlphaMap":
        """Ground-truth concept ``j`` goes to predicted concept ``routing[j]``,
        value ``v`` to value ``functions[j][v]``."""
        b = space.b
        targets = [routing[j] * b + functions[j][v] for j in range(space.k) for v in range(b)]
        return cls(space, tuple(targets))

    @classmethod
    def identity(cls, space: ConceptSpace) -> "AlphaMap":
        return cls(space, tuple(range(space.width)))

    @cached_property
    def A(self) -> np.ndarray:
        A = np.zeros((self.space.width, self.space.width), dtype=bool)
        A[list(self.targets), list(range(self.space.width))] = True
        return A

    @cached_property
    def O(self) -> np.ndarray:
        k, b = self.space.k, self.space.b
        O = np.zeros((k, k), dtype=bool)
        for y, x in enumerate(self.targets):
            O[x // b, y // b] = True
        return O

    def satisfies(self, mode: StructureMode) -> bool:
        if mode is StructureMode.UNRESTRICTED:
            return True
        O = self.O
        # a concept split across predicted blocks has a column with several ones
        if np.any(O.sum(axis=0) != 1):
            return False
        return mode is StructureMode.COMPLETE or bool(np.all(O.sum(axis=1) == 1))


@dataclass(frozen=True)
class UnrestrictedAlpha:
    """Arbitrary map on concept vectors, as a table indexed by concept code."""

    space: ConceptSpace
    table: tuple[int, ...]

    def __call__(self, c: Sequence[int]) -> ConceptVector:
        return self.space.decode(self.table[self.space.code(c)])


def apply(alpha: AlphaMap, c: Sequence[int]) -> tuple[int, ...]:
    """Boolean product ``A (x) onehot(c)``."""
    c = alpha.space.check(c)
    bits = [0] * alpha.space.width
    b = alpha.space.b
    for j, v in enumerate(c):
        bits[alpha.targets[j * b + v]] = 1
    return tuple(bits)


def apply_decoded(alpha: AlphaMap, c: Sequence[int]) -> ConceptVector | None:
    return alpha.space.decode_bits(apply(alpha, c))


# ---------------------------------------------------------------------------
# Enumeration


def alpha_space_size(space: ConceptSpace, mode: StructureMode) -> int:
    k, b = space.k, space.b
    if mode is StructureMode.UNRESTRICTED:
        return space.size**space.size
    per_block = (b**b) ** k
    if mode is StructureMode.COMPLETE:
        return k**k * per_block
    return factorial(k) * per_block


def _routings(k: int, mode: StructureMode) -> Iterator[tuple[int, ...]]:
    if mode is StructureMode.PERMUTATION:
        return itertools.permutations(range(k))
    return itertools.product(range(k), repeat=k)


def enumerate_alphas(
    space: ConceptSpace, mode: StructureMode = StructureMode.PERMUTATION, cap: int = DEFAULT_ALPHA_CAP
) -> Iterator[AlphaMap | UnrestrictedAlpha]:
    """Every structurally valid map exactly once, in lexicographic order
    (routing first, then per-block value functions)."""
    mode = StructureMode(mode)
    require_enumerable(alpha_space_size(space, mode), cap, f"{mode.value} map space")
    if mode is StructureMode.UNRESTRICTED:
        for table in itertools.product(range(space.size), repeat=space.size):
            yield UnrestrictedAlpha(space, table)
        return
    block_fns = list(itertools.product(range(space.b), repeat=space.b))
    for routing in _routings(space.k, mode):
        for fns in itertools.product(block_fns, repeat=space.k):
            yield AlphaMap.from_blocks(space, routing, fns)


# ---------------------------------------------------------------------------
# Counting


def is_optimal(alpha: AlphaMap | UnrestrictedAlpha, K: Knowledge, supp: Support) -> bool:
    """Whether ``alpha`` reproduces every training label.

    Unrestricted maps compare labels directly. Structured maps evaluate the
    knowledge formula on the raw routed bits, the same way the CNF encoding
    does; without a formula, only one-hot (permutation) images are decoded.
    """
    if isinstance(alpha, UnrestrictedAlpha):
        return all(K.beta(alpha(c)) == y for c, y in supp.entries())
    for c, y in supp.entries():
        bits = apply(alpha, c)
        if K.has_formula:
            if K.eval_indicators(bits) != K.expected_indicators(y):
                return False
        else:
            decoded = K.space.decode_bits(bits)
            if decoded is None:
                raise KnowledgeError("knowledge without formula needs one-hot images")
            if K.beta(decoded) != y:
                return False
    return True


def count_by_enumeration(
    K: Knowledge,
    supp: Support,
    mode: StructureMode = StructureMode.PERMUTATION,
    cap: int = DEFAULT_ALPHA_CAP,
    chunk: int = 1 << 16,
) -> int:
    """Brute force: number of valid maps that reproduce all support labels.

    Every map in the mode's space is materialized and checked; numpy only
    batches the checks.
    """
    mode = StructureMode(mode)
    space = K.space
    require_enumerable(alpha_space_size(space, mode), cap, f"{mode.value} map space")
    if mode is StructureMode.UNRESTRICTED:
        return _count_unrestricted(K, supp, chunk)
    return _count_structured(K, supp, mode, chunk)


def _count_unrestricted(K: Knowledge, supp: Support, chunk: int) -> int:
    n = K.space.size
    ids = K.label_ids()
    supp_codes = supp.codes()
    total = n**n
    count = 0
    for start in range(0, total, chunk):
        rows = np.arange(start, min(start + chunk, total), dtype=np.int64)
        ok = np.ones(len(rows), dtype=bool)
        for c in supp_codes:
            # entry c of the table is digit c of the row index, most significant first
            image = (rows // n ** (n - 1 - int(c))) % n
            ok &= ids[image] == ids[c]
        count += int(ok.sum())
    return count


def _structured_targets(space: ConceptSpace, routing: Sequence[int], fn_idx: np.ndarray) -> np.ndarray:
    """Targets for a batch of per-block function indices under one routing."""
    k, b = space.k, space.b
    bb = b**b
    out = np.empty((len(fn_idx), space.width), dtype=np.int64)
    for j in range(k):
        f = (fn_idx // bb ** (k - 1 - j)) % bb
        for v in range(b):
            out[:, j * b + v] = routing[j] * b + (f // b ** (b - 1 - v)) % b
    return out


def _count_structured(K: Knowledge, supp: Support, mode: StructureMode, chunk: int) -> int:
    space = K.space
    k, b = space.k, space.b
    n_fns = (b**b) ** k
    examples = list(supp.entries())
    if K.has_formula:
        expected = [np.array(K.expected_indicators(y)) for _, y in examples]
    else:
        ids = K.label_ids()
        powers = b ** np.arange(k - 1, -1, -1, dtype=np.int64)
    count = 0
    for routing in _routings(k, mode):
        for start in range(0, n_fns, chunk):
            fn_idx = np.arange(start, min(start + chunk, n_fns), dtype=np.int64)
            targets = _structured_targets(space, routing, fn_idx)
            rows = np.arange(len(fn_idx))
            ok = np.ones(len(fn_idx), dtype=bool)
            for d, (c, y) in enumerate(examples):
                chat = np.zeros((len(fn_idx), space.width), dtype=bool)
                for j, v in enumerate(c):
                    chat[rows, targets[:, j * b + v]] = True
                if K.has_formula:
                    for ind, want in zip(K.indicators, expected[d]):
                        ok &= evaluate_batch(ind.formula, chat) == want
                else:
                    blocks = chat.reshape(len(fn_idx), k, b)
                    if np.any(blocks.sum(axis=2) != 1):
                        raise KnowledgeError("knowledge without formula needs one-hot images")
                    codes = blocks.argmax(axis=2) @ powers
                    ok &= ids[codes] == ids[space.code(c)]
                if not ok.any():
                    break
            count += int(ok.sum())
    return count


def count_closed_form(K: Knowledge, supp: Support, bound: int = DEFAULT_ENUMERATION_BOUND) -> int:
    """Optimal unrestricted maps: each support vector may go anywhere in its
    equivalence class, every other vector anywhere at all."""
    sizes = class_sizes(K, bound)
    n = K.space.size
    total = 1
    for c in supp.codes():
        total *= int(sizes[c])
    return total * n ** (n - len(supp))


def rs_affected(count: int) -> bool:
    return count > 1
