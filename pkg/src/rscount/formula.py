"""Propositional formulas: CNF with DIMACS I/O, expression trees, Tseitin.

Literals are non-zero ints in DIMACS convention: ``v`` is the variable ``v``
taken positively and ``-v`` its negation. Clauses are tuples of literals.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EvaluationError, ParseError
from .rng import SplitMix64

Clause = tuple  # tuple[int, ...]


# ---------------------------------------------------------------------------
# CNF


@dataclass(frozen=True)
class CnfFormula:
    num_variables: int
    clauses: tuple[Clause, ...]
    # opaque ``c`` lines, kept for round-tripping (e.g. ``ind 1 2 0``)
    comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(c) for c in self.clauses))
        object.__setattr__(self, "comments", tuple(self.comments))
        if self.num_variables < 0:
            raise ValueError("num_variables must be non-negative")
        for idx, clause in enumerate(self.clauses):
            _check_clause(clause, self.num_variables, idx)

    @property
    def variables(self) -> set[int]:
        return {abs(lit) for c in self.clauses for lit in c}

    def projection(self) -> list[int] | None:
        """Variables listed on ``c ind ... 0`` comment lines, if any."""
        found = None
        for text in self.comments:
            parts = text.split()
            if parts and parts[0] == "ind":
                found = (found or []) + [int(p) for p in parts[1:] if p != "0"]
        return found


def _check_clause(clause: Sequence[int], num_variables: int, idx: int) -> None:
    if not clause:
        raise ValueError(f"clause {idx} is empty")
    if len(set(clause)) != len(clause):
        raise ValueError(f"clause {idx} repeats a literal")
    for lit in clause:
        if not isinstance(lit, (int, np.integer)) or lit == 0:
            raise ValueError(f"clause {idx}: invalid literal {lit!r}")
        if abs(lit) > num_variables:
            raise ValueError(f"clause {idx}: literal {lit} exceeds {num_variables} variables")


def parse_dimacs(text: str | Iterable[str]) -> CnfFormula:
    """Parse DIMACS CNF text.

    Clauses may span lines and several may share a line. ``%`` lines and any
    token after the declared clause count are rejected.
    """
    lines = text.splitlines() if isinstance(text, str) else [l.rstrip("\n") for l in text]
    comments: list[str] = []
    header: tuple[int, int] | None = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    current_line = 0

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line[0] == "c" and (len(line) == 1 or line[1] in " \t"):
            comments.append(line[1:].strip())
            continue
        if line[0] == "p":
            if header is not None:
                raise ParseError("duplicate problem line", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[0] != "p" or parts[1] != "cnf":
                raise ParseError(f"malformed header {line!r}", lineno)
            try:
                nv, nc = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"malformed header {line!r}", lineno) from None
            if nv < 0 or nc < 0:
                raise ParseError("negative counts in header", lineno)
            header = (nv, nc)
            continue
        if header is None:
            raise ParseError("clause data before problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"unexpected token {tok!r}", lineno) from None
            if len(clauses) >= header[1]:
                raise ParseError("more clauses than declared in header", lineno)
            if lit == 0:
                if not current:
                    raise ParseError("empty clause", lineno)
                if len(set(current)) != len(current):
                    raise ParseError("clause repeats a literal", lineno)
                clauses.append(tuple(current))
                current = []
                continue
            if abs(lit) > header[0]:
                raise ParseError(f"literal {lit} exceeds declared {header[0]} variables", lineno)
            if not current:
                current_line = lineno
            current.append(lit)

    if header is None:
        raise ParseError("missing problem line 'p cnf V C'")
    if current:
        raise ParseError("clause missing terminating 0", current_line)
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}", len(lines))
    return CnfFormula(header[0], tuple(clauses), tuple(comments))


def emit_dimacs(f: CnfFormula, comments: Iterable[str] | None = None) -> str:
    """Serialize ``f``; comments (default: ``f.comments``) come first."""
    out = []
    for text in f.comments if comments is None else comments:
        out.append(f"c {text}" if text else "c")
    out.append(f"p cnf {f.num_variables} {len(f.clauses)}")
    for clause in f.clauses:
        out.append(" ".join(map(str, clause)) + " 0")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Expression trees


class Kind(str, enum.Enum):
    ATOM = "atom"
    NOT = "not"
    AND = "and"
    OR = "or"
    XOR = "xor"
    IFF = "iff"
    EQ = "eq"
    CONST = "const"


@dataclass(frozen=True)
class BoolExpr:
    """Immutable expression node.

    ``value`` is the atom index for ATOM, the truth value for CONST, and a
    pair of integer terms for EQ. A term is ``("var", i)`` (integer variable
    ``i``, 0-based) or ``("const", v)``. EQ nodes only make sense over
    categorical variables and are lowered to bits by the knowledge layer.
    """

    kind: Kind
    args: tuple["BoolExpr", ...] = ()
    value: object = None

    def __and__(self, other: "BoolExpr") -> "BoolExpr":
        return And(self, other)

    def __or__(self, other: "BoolExpr") -> "BoolExpr":
        return Or(self, other)

    def __xor__(self, other: "BoolExpr") -> "BoolExpr":
        return Xor(self, other)

    def __invert__(self) -> "BoolExpr":
        return Not(self)

    def __repr__(self):
        k = self.kind
        if k is Kind.ATOM:
            return f"x{self.value}"
        if k is Kind.CONST:
            return "T" if self.value else "F"
        if k is Kind.NOT:
            return f"~{self.args[0]!r}"
        if k is Kind.EQ:
            (ta, a), (tb, b) = self.value
            fa = f"v{a}" if ta == "var" else str(a)
            fb = f"v{b}" if tb == "var" else str(b)
            return f"({fa} == {fb})"
        sep = {Kind.AND: " & ", Kind.OR: " | ", Kind.XOR: " ^ ", Kind.IFF: " <-> "}[k]
        return "(" + sep.join(map(repr, self.args)) + ")"


TRUE = BoolExpr(Kind.CONST, value=True)
FALSE = BoolExpr(Kind.CONST, value=False)


def Atom(i: int) -> BoolExpr:
    if i < 1:
        raise ValueError("atom indices start at 1")
    return BoolExpr(Kind.ATOM, value=int(i))


def Const(v: bool) -> BoolExpr:
    return TRUE if v else FALSE


def Not(e: BoolExpr) -> BoolExpr:
    return BoolExpr(Kind.NOT, (e,))


def And(*es: BoolExpr) -> BoolExpr:
    return BoolExpr(Kind.AND, tuple(es))


def Or(*es: BoolExpr) -> BoolExpr:
    return BoolExpr(Kind.OR, tuple(es))


def Xor(*es: BoolExpr) -> BoolExpr:
    return BoolExpr(Kind.XOR, tuple(es))


def Iff(a: BoolExpr, b: BoolExpr) -> BoolExpr:
    return BoolExpr(Kind.IFF, (a, b))


def Implies(a: BoolExpr, b: BoolExpr) -> BoolExpr:
    return Or(Not(a), b)


def Eq(lhs, rhs) -> BoolExpr:
    """Equality of two integer terms; ints are constants, ``("var", i)`` variables."""

    def term(t):
        if isinstance(t, tuple):
            return t
        return ("const", int(t))

    return BoolExpr(Kind.EQ, value=(term(lhs), term(rhs)))


def atoms(e: BoolExpr | CnfFormula) -> set[int]:
    if isinstance(e, CnfFormula):
        return e.variables
    found: set[int] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if n.kind is Kind.ATOM:
            found.add(n.value)
        stack.extend(n.args)
    return found


def rename_atoms(e: BoolExpr, mapping: Mapping[int, int] | Sequence[int]) -> BoolExpr:
    """Replace each atom ``i`` by ``mapping[i]``; a negative target negates."""
    memo: dict[BoolExpr, BoolExpr] = {}

    def go(n: BoolExpr) -> BoolExpr:
        if n in memo:
            return memo[n]
        if n.kind is Kind.ATOM:
            t = mapping[n.value]
            r = Atom(t) if t > 0 else Not(Atom(-t))
        elif n.args:
            r = BoolExpr(n.kind, tuple(go(a) for a in n.args), n.value)
        else:
            r = n
        memo[n] = r
        return r

    return go(e)


def cnf_to_expr(f: CnfFormula) -> BoolExpr:
    def lit(l):
        return Atom(l) if l > 0 else Not(Atom(-l))

    return And(*(Or(*(lit(l) for l in c)) for c in f.clauses))


def _lookup(a, i: int) -> bool:
    try:
        return bool(a[i])
    except (KeyError, IndexError):
        raise EvaluationError(f"assignment has no value for variable {i}") from None


def evaluate(e: BoolExpr | CnfFormula, assignment: Mapping[int, bool]) -> bool:
    """Two-valued semantics; XOR is parity, IFF is equality.

    ``assignment`` maps variable index to truth value. A sequence is also
    accepted, indexed so that ``assignment[i]`` is variable ``i`` (callers
    usually pad position 0).
    """
    if isinstance(e, CnfFormula):
        for v in range(1, e.num_variables + 1):
            _lookup(assignment, v)
        return all(any(_lookup(assignment, abs(l)) == (l > 0) for l in c) for c in e.clauses)
    return _eval(e, assignment)


def _eval(n: BoolExpr, a) -> bool:
    k = n.kind
    if k is Kind.ATOM:
        return _lookup(a, n.value)
    if k is Kind.CONST:
        return bool(n.value)
    if k is Kind.NOT:
        return not _eval(n.args[0], a)
    if k is Kind.AND:
        return all(_eval(c, a) for c in n.args)
    if k is Kind.OR:
        return any(_eval(c, a) for c in n.args)
    if k is Kind.XOR:
        return sum(_eval(c, a) for c in n.args) % 2 == 1
    if k is Kind.IFF:
        return _eval(n.args[0], a) == _eval(n.args[1], a)
    raise EvaluationError(f"cannot evaluate {k.value} node as a boolean formula")


def evaluate_batch(e: BoolExpr | CnfFormula, bits: np.ndarray) -> np.ndarray:
    """Vectorised evaluation over the rows of a boolean matrix.

    Column ``i - 1`` of ``bits`` holds atom ``i``. Returns one bool per row.
    """
    bits = np.asarray(bits, dtype=bool)
    n_rows = bits.shape[0]
    if isinstance(e, CnfFormula):
        if e.num_variables > bits.shape[1]:
            raise EvaluationError("bit matrix is narrower than the formula")
        out = np.ones(n_rows, dtype=bool)
        for c in e.clauses:
            sat = np.zeros(n_rows, dtype=bool)
            for l in c:
                col = bits[:, abs(l) - 1]
                sat |= col if l > 0 else ~col
            out &= sat
        return out

    memo: dict[BoolExpr, np.ndarray] = {}

    def go(n: BoolExpr) -> np.ndarray:
        r = memo.get(n)
        if r is not None:
            return r
        k = n.kind
        if k is Kind.ATOM:
            if n.value > bits.shape[1]:
                raise EvaluationError(f"assignment has no value for variable {n.value}")
            r = bits[:, n.value - 1]
        elif k is Kind.CONST:
            r = np.full(n_rows, bool(n.value))
        elif k is Kind.NOT:
            r = ~go(n.args[0])
        elif k is Kind.AND:
            r = np.ones(n_rows, dtype=bool)
            for c in n.args:
                r = r & go(c)
        elif k is Kind.OR:
            r = np.zeros(n_rows, dtype=bool)
            for c in n.args:
                r = r | go(c)
        elif k is Kind.XOR:
            r = np.zeros(n_rows, dtype=bool)
            for c in n.args:
                r = r ^ go(c)
        elif k is Kind.IFF:
            r = go(n.args[0]) == go(n.args[1])
        else:
            raise EvaluationError(f"cannot evaluate {k.value} node as a boolean formula")
        memo[n] = r
        return r

    return go(e)


# ---------------------------------------------------------------------------
# Tseitin


def simplify(e: BoolExpr) -> BoolExpr:
    """Fold constants, flatten nested AND/OR, drop double negation."""
    memo: dict[BoolExpr, BoolExpr] = {}

    def go(n: BoolExpr) -> BoolExpr:
        if n in memo:
            return memo[n]
        k = n.kind
        if k in (Kind.ATOM, Kind.CONST):
            r = n
        elif k is Kind.EQ:
            raise EvaluationError("EQ nodes must be lowered before simplification")
        elif k is Kind.NOT:
            c = go(n.args[0])
            if c.kind is Kind.CONST:
                r = Const(not c.value)
            elif c.kind is Kind.NOT:
                r = c.args[0]
            else:
                r = Not(c)
        elif k in (Kind.AND, Kind.OR):
            absorbing = k is Kind.OR  # OR absorbs on True, AND on False
            kids: list[BoolExpr] = []
            seen = set()
            r = None
            for c in n.args:
                c = go(c)
                parts = c.args if c.kind is k else (c,)
                for p in parts:
                    if p.kind is Kind.CONST:
                        if p.value == absorbing:
                            r = Const(absorbing)
                            break
                        continue
                    if p not in seen:
                        seen.add(p)
                        kids.append(p)
                if r is not None:
                    break
            if r is None:
                if any(Not(p) in seen for p in kids if p.kind is not Kind.NOT):
                    r = Const(absorbing)
                elif not kids:
                    r = Const(not absorbing)
                elif len(kids) == 1:
                    r = kids[0]
                else:
                    r = BoolExpr(k, tuple(kids))
        elif k in (Kind.XOR, Kind.IFF):
            if k is Kind.IFF and len(n.args) != 2:
                raise EvaluationError("IFF takes exactly two arguments")
            parity = k is Kind.IFF  # IFF(a, b) == ~XOR(a, b)
            counts: dict[BoolExpr, int] = {}
            for c in n.args:
                c = go(c)
                if c.kind is Kind.NOT:
                    parity = not parity
                    c = c.args[0]
                if c.kind is Kind.CONST:
                    parity ^= bool(c.value)
                else:
                    counts[c] = counts.get(c, 0) + 1
            rest = [c for c, cnt in counts.items() if cnt % 2]
            if not rest:
                r = Const(parity)
            else:
                base = rest[0] if len(rest) == 1 else Xor(*rest)
                r = go(Not(base)) if parity else base
        else:  # pragma: no cover
            raise EvaluationError(f"unknown node kind {k}")
        memo[n] = r
        return r

    return go(e)


def tseitin(e: BoolExpr, first_aux_var: int) -> tuple[CnfFormula, int, int]:
    """Definitional CNF for ``e``.

    Returns ``(cnf, root, aux_count)``. Every total assignment to the atoms
    of ``e`` extends in exactly one way to the aux variables
    ``first_aux_var .. first_aux_var + aux_count - 1``, and under that
    extension literal ``root`` is true iff ``e`` is. NOT never allocates a
    variable, it only flips polarity.
    """
    max_atom = max(atoms(e), default=0)
    if first_aux_var <= max_atom:
        raise ValueError("first_aux_var must exceed every atom index")
    clauses: list[tuple[int, ...]] = []
    nxt = first_aux_var
    memo: dict[BoolExpr, int] = {}

    def fresh() -> int:
        nonlocal nxt
        v = nxt
        nxt += 1
        return v

    def go(n: BoolExpr) -> int:
        if n in memo:
            return memo[n]
        k = n.kind
        if k is Kind.ATOM:
            r = n.value
        elif k is Kind.NOT:
            r = -go(n.args[0])
        elif k is Kind.CONST:
            r = fresh()
            clauses.append((r,) if n.value else (-r,))
        elif k is Kind.AND or k is Kind.OR:
            lits = list(dict.fromkeys(go(c) for c in n.args))
            if len(lits) == 1:
                r = lits[0]
            else:
                r = fresh()
                if k is Kind.AND:
                    clauses.extend((-r, l) for l in lits)
                    clauses.append((r, *(-l for l in lits)))
                else:
                    clauses.extend((r, -l) for l in lits)
                    clauses.append((-r, *lits))
        elif k is Kind.XOR or k is Kind.IFF:
            lits = [go(c) for c in n.args]
            r = lits[0]
            for l in lits[1:]:
                r = _xor_gate(r, l, fresh(), clauses)
            if k is Kind.IFF:
                r = -r
        else:
            raise EvaluationError(f"tseitin: unsupported node kind {k.value}")
        memo[n] = r
        return r

    root = go(simplify(e))
    aux_count = nxt - first_aux_var
    num_vars = max(max_atom, nxt - 1)
    return CnfFormula(num_vars, tuple(clauses)), root, aux_count


def _xor_gate(a: int, b: int, out: int, clauses: list) -> int:
    clauses.append((-out, a, b))
    clauses.append((-out, -a, -b))
    clauses.append((out, -a, b))
    clauses.append((out, a, -b))
    return out


# ---------------------------------------------------------------------------
# Random l-CNF


def random_lcnf(k: int, m: int, l: int, seed: int) -> CnfFormula:
    """Random ``l``-CNF with ``m`` distinct clauses over ``k`` variables.

    Each clause picks ``l`` distinct variables uniformly (rejection on
    repeats), then a uniform sign per variable. Duplicate clauses are
    rejected and redrawn. Literals in a clause are sorted by variable.
    Uses :class:`SplitMix64`, so output depends only on the arguments.
    """
    if not 1 <= l <= k:
        raise ValueError(f"clause width {l} must be in [1, {k}]")
    if m < 1:
        raise ValueError("need at least one clause")
    possible = _comb(k, l) * 2**l
    if m > possible:
        raise ValueError(f"only {possible} distinct width-{l} clauses exist over {k} variables")
    rng = SplitMix64(seed)
    seen: set[tuple[int, ...]] = set()
    clauses = []
    while len(clauses) < m:
        chosen: list[int] = []
        while len(chosen) < l:
            v = rng.randbelow(k) + 1
            if v not in chosen:
                chosen.append(v)
        chosen.sort()
        clause = tuple(v if rng.randbelow(2) else -v for v in chosen)
        if clause in seen:
            continue
        seen.add(clause)
        clauses.append(clause)
    return CnfFormula(k, tuple(clauses))


def _comb(n: int, r: int) -> int:
    from math import comb

    return comb(n, r)


def all_assignments(n: int) -> Iterable[tuple[bool, ...]]:
    """All ``2**n`` assignments, first variable most significant."""
    return itertools.product((False, True), repeat=n)
