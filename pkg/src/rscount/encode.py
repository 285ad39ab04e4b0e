"""CNF encoding of RS counting.

Variables, numbered contiguously in this order:

* ``O[i][j]`` (k x k, row-major): predicted concept ``i`` reads ground-truth
  concept ``j``;
* ``A[x][y]`` (kb x kb, row-major): ground-truth bit ``y`` is routed to
  predicted bit ``x``;
* ``chat[d][x]`` per support example ``d``: predicted bits for that example;
* Tseitin auxiliaries for the knowledge formulas.

Constraints: ``O`` is defined from the blocks of ``A``; each column of ``A``
has exactly one true entry; ``chat`` is the boolean product of ``A`` with
the (constant) one-hot ground truth; the knowledge evaluated on ``chat``
must match each example's label; each column of ``O`` has exactly one true
entry, and for permutations each row as well.

All non-``A`` variables are functionally determined by ``A``, so the plain
model count is the number of admissible ``A`` matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .alphamap import StructureMode
from .errors import EncodingError
from .formula import CnfFormula, emit_dimacs, rename_atoms, tseitin
from .knowledge import Knowledge, Support


@dataclass(frozen=True)
class VarBook:
    k: int
    b: int
    n_examples: int
    aux_start: int
    aux_end: int  # exclusive

    @property
    def width(self) -> int:
        return self.k * self.b

    def o_var(self, i: int, j: int) -> int:
        return 1 + i * self.k + j

    def a_var(self, x: int, y: int) -> int:
        return 1 + self.k * self.k + x * self.width + y

    def chat_var(self, d: int, x: int) -> int:
        return 1 + self.k * self.k + self.width**2 + d * self.width + x

    @property
    def o_range(self) -> tuple[int, int]:
        return 1, self.k * self.k

    @property
    def a_range(self) -> tuple[int, int]:
        lo = self.k * self.k + 1
        return lo, lo + self.width**2 - 1

    @property
    def chat_range(self) -> tuple[int, int]:
        lo = self.a_range[1] + 1
        return lo, lo + self.n_examples * self.width - 1

    @property
    def aux_range(self) -> tuple[int, int]:
        return self.aux_start, self.aux_end - 1

    def ranges(self) -> dict[str, list[int]]:
        return {
            "O": list(self.o_range),
            "A": list(self.a_range),
            "chat": list(self.chat_range),
            "aux": list(self.aux_range),
        }


@dataclass(frozen=True)
class CountingProblem:
    cnf: CnfFormula
    projection: tuple[int, ...]
    book: VarBook
    mode: StructureMode
    support_size: int


def exactly_one(vars: Sequence[int]) -> list[tuple[int, ...]]:
    """Pairwise exactly-one: one at-least-one clause plus all binary at-most-one clauses."""
    vars = list(vars)
    if not vars:
        raise EncodingError("exactly_one needs at least one variable")
    if len(set(vars)) != len(vars):
        raise EncodingError("exactly_one variables must be distinct")
    clauses = [tuple(vars)]
    clauses.extend((-a, -b) for a, b in itertools.combinations(vars, 2))
    return clauses


def build_counting_cnf(
    K: Knowledge, supp: Support, mode: StructureMode = StructureMode.PERMUTATION
) -> CountingProblem:
    mode = StructureMode(mode)
    if mode is StructureMode.UNRESTRICTED:
        raise EncodingError("unrestricted maps have no CNF encoding; use closed form or enumeration")
    if not K.has_formula:
        raise EncodingError("knowledge has no formula form")
    if len(supp) == 0:
        raise EncodingError("support is empty")

    k, b = K.space.k, K.space.b
    w = k * b
    examples = list(supp.entries())
    n = len(examples)
    first_aux = 1 + k * k + w * w + n * w
    probe = VarBook(k, b, n, first_aux, first_aux)
    O, A, chat = probe.o_var, probe.a_var, probe.chat_var
    clauses: list[tuple[int, ...]] = []

    # O[i, j] <-> OR of block (i, j) of A
    for i in range(k):
        for j in range(k):
            block = [A(x, y) for x in range(i * b, (i + 1) * b) for y in range(j * b, (j + 1) * b)]
            clauses.append((-O(i, j), *block))
            clauses.extend((O(i, j), -a) for a in block)

    for y in range(w):
        clauses.extend(exactly_one([A(x, y) for x in range(w)]))

    nxt = first_aux
    for d, (c, label) in enumerate(examples):
        cols = [j * b + v for j, v in enumerate(c)]
        for x in range(w):
            srcs = [A(x, y) for y in cols]
            clauses.append((-chat(d, x), *srcs))
            clauses.extend((chat(d, x), -s) for s in srcs)

        mapping = {x + 1: chat(d, x) for x in range(w)}
        for ind, want in zip(K.indicators, K.expected_indicators(label)):
            sub, root, n_aux = tseitin(rename_atoms(ind.formula, mapping), nxt)
            nxt += n_aux
            clauses.extend(sub.clauses)
            clauses.append((root,) if want else (-root,))

    for j in range(k):
        clauses.extend(exactly_one([O(i, j) for i in range(k)]))
    if mode is StructureMode.PERMUTATION:
        for i in range(k):
            clauses.extend(exactly_one([O(i, j) for j in range(k)]))

    book = VarBook(k, b, n, first_aux, nxt)
    projection = tuple(range(book.a_range[0], book.a_range[1] + 1))
    cnf = CnfFormula(nxt - 1, tuple(clauses))
    return CountingProblem(cnf, projection, book, mode, n)


def problem_comments(p: CountingProblem) -> list[str]:
    bk = p.book
    lines = ["ind " + " ".join(map(str, p.projection)) + " 0"]
    lines.append(f"rscount mode={p.mode.value} k={bk.k} b={bk.b} support={p.support_size}")
    for name, (lo, hi) in bk.ranges().items():
        if hi >= lo:
            lines.append(f"vars {name} {lo}-{hi}")
        else:
            lines.append(f"vars {name} none")
    lines.append("O[i][j] = 1 + i*k + j; A[x][y] = 1 + k*k + x*k*b + y")
    lines.append("chat[d][x] = 1 + k*k + (k*b)^2 + d*k*b + x; indices 0-based")
    return lines


def export_problem(p: CountingProblem) -> str:
    """DIMACS text whose first line is the ``c ind`` projection over ``A``."""
    return emit_dimacs(p.cnf, problem_comments(p))
