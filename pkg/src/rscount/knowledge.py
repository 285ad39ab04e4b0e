"""Concept spaces, deterministic knowledge maps and training supports.

One-hot layout: concept ``j`` occupies bit positions ``[j*b, (j+1)*b)``
(0-based) and bit ``j*b + v`` is set iff the concept takes value ``v``. In
formulas over bits, position ``p`` is atom ``p + 1``.

For binary spaces (``b == 2``) a logical atom ``c_j`` is the value-1 bit of
block ``j``, so a formula written over ``k`` atoms lifts mechanically.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence as SequenceABC
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, KnowledgeError
from .formula import And, Atom, BoolExpr, Kind, Not, Or, evaluate_batch

DEFAULT_ENUMERATION_BOUND = 1 << 22

ConceptVector = tuple  # tuple[int, ...]
LabelVector = tuple  # tuple[int, ...]


@dataclass(frozen=True)
class ConceptSpace:
    k: int
    b: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one concept")
        if self.b < 2:
            raise ValueError("concepts need at least two values")

    @property
    def size(self) -> int:
        return self.b**self.k

    @property
    def width(self) -> int:
        """Number of one-hot bits."""
        return self.k * self.b

    def bit(self, concept: int, value: int) -> int:
        return concept * self.b + value

    def atom(self, concept: int, value: int) -> BoolExpr:
        return Atom(self.bit(concept, value) + 1)

    def contains(self, c: Sequence[int]) -> bool:
        return len(c) == self.k and all(
            isinstance(v, (int, np.integer)) and 0 <= v < self.b for v in c
        )

    def check(self, c: Sequence[int]) -> ConceptVector:
        if not self.contains(c):
            raise KnowledgeError(f"{tuple(c)!r} is not in the space k={self.k}, b={self.b}")
        return tuple(int(v) for v in c)

    def vectors(self) -> Iterator[ConceptVector]:
        return itertools.product(range(self.b), repeat=self.k)

    def code(self, c: Sequence[int]) -> int:
        """Base-``b`` positional code, first concept most significant."""
        out = 0
        for v in c:
            out = out * self.b + int(v)
        return out

    def decode(self, code: int) -> ConceptVector:
        vals = []
        for _ in range(self.k):
            code, v = divmod(code, self.b)
            vals.append(v)
        return tuple(reversed(vals))

    def onehot(self, c: Sequence[int]) -> tuple[int, ...]:
        bits = [0] * self.width
        for j, v in enumerate(c):
            bits[j * self.b + v] = 1
        return tuple(bits)

    def decode_bits(self, bits: Sequence[int]) -> ConceptVector | None:
        """Inverse of :meth:`onehot`; ``None`` if some block is not one-hot."""
        out = []
        for j in range(self.k):
            block = bits[j * self.b : (j + 1) * self.b]
            if sum(1 for x in block if x) != 1:
                return None
            out.append(next(i for i, x in enumerate(block) if x))
        return tuple(out)

    def digits(self, codes: np.ndarray) -> np.ndarray:
        """Concept values (one row per code, one column per concept)."""
        rem = np.asarray(codes, dtype=np.int64).copy()
        out = np.empty((len(rem), self.k), dtype=np.int64)
        for j in reversed(range(self.k)):
            rem, out[:, j] = np.divmod(rem, self.b)
        return out

    def onehot_matrix(self, codes: np.ndarray) -> np.ndarray:
        """One-hot rows for an array of concept codes."""
        codes = np.asarray(codes, dtype=np.int64)
        out = np.zeros((len(codes), self.width), dtype=bool)
        rows = np.arange(len(codes))
        rem = codes.copy()
        for j in reversed(range(self.k)):
            rem, v = np.divmod(rem, self.b)
            out[rows, j * self.b + v] = True
        return out


def require_enumerable(n: int, bound: int, what: str) -> None:
    if n > bound:
        raise CapacityError(f"{what} is too large to enumerate", n, bound)


@dataclass(frozen=True)
class Indicator:
    """Binary indicator ``label[position] == value`` with its bit formula."""

    position: int
    value: int
    formula: BoolExpr


def _is_boolean(domain: Sequence[int]) -> bool:
    return tuple(domain) == (0, 1)


@dataclass(frozen=True, eq=False)
class Knowledge:
    """Deterministic knowledge: a total map from concept vectors to labels.

    ``indicators`` realizes the map as formulas over the one-hot bits: one
    per boolean label position (``label == 1``), and one per value for
    categorical positions. It is ``None`` when no formula form is available.
    """

    space: ConceptSpace
    label_domains: tuple[tuple[int, ...], ...]
    beta: Callable[[ConceptVector], LabelVector] = field(repr=False)
    indicators: tuple[Indicator, ...] | None = field(default=None, repr=False)
    name: str = ""
    concept_names: tuple[str, ...] | None = None
    label_names: tuple[str, ...] | None = None
    value_names: tuple[tuple[str, ...] | None, ...] | None = field(default=None, repr=False)
    # values each concept actually takes in data; None means the full range
    concept_domains: tuple[tuple[int, ...], ...] | None = field(default=None, repr=False)

    @property
    def label_arity(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.label_domains)

    @property
    def has_formula(self) -> bool:
        return self.indicators is not None

    def label_of(self, c: Sequence[int]) -> LabelVector:
        return self.beta(self.space.check(c))

    def label_table(self, bound: int = DEFAULT_ENUMERATION_BOUND) -> list[LabelVector]:
        """Labels of every concept vector, indexed by concept code."""
        return self._table(bound)

    def _table(self, bound: int) -> list[LabelVector]:
        cached = self.__dict__.get("_label_table")
        if cached is None:
            require_enumerable(self.space.size, bound, "concept space")
            if self.indicators is not None:
                mat = self.labels_batch(np.arange(self.space.size, dtype=np.int64))
                cached = [tuple(int(v) for v in row) for row in mat]
            else:
                cached = [self.beta(c) for c in self.space.vectors()]
            object.__setattr__(self, "_label_table", cached)
        return cached

    def label_ids(self, bound: int = DEFAULT_ENUMERATION_BOUND) -> np.ndarray:
        """Dense id per concept code; equal ids iff equal labels."""
        table = self._table(bound)
        ids: dict[LabelVector, int] = {}
        return np.array([ids.setdefault(y, len(ids)) for y in table], dtype=np.int64)

    def labels_batch(self, codes: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
        """Label matrix (one row per concept code), vectorised through the
        indicator formulas when available."""
        codes = np.asarray(codes, dtype=np.int64)
        out = np.zeros((len(codes), len(self.label_domains)), dtype=np.int64)
        if self.indicators is None:
            for r, code in enumerate(codes):
                out[r] = self.beta(self.space.decode(int(code)))
            return out
        for start in range(0, len(codes), chunk):
            part = codes[start : start + chunk]
            bits = self.space.onehot_matrix(part)
            rows = slice(start, start + len(part))
            for ind in self.indicators:
                hit = evaluate_batch(ind.formula, bits)
                if _is_boolean(self.label_domains[ind.position]):
                    out[rows, ind.position] = hit
                else:
                    out[rows, ind.position] = np.where(hit, ind.value, out[rows, ind.position])
        return out

    def candidate_codes(self) -> np.ndarray:
        """Codes of every vector whose concepts stay inside ``concept_domains``."""
        space = self.space
        domains = self.concept_domains or tuple(tuple(range(space.b)) for _ in range(space.k))
        codes = np.zeros(1, dtype=np.int64)
        for dom in domains:
            codes = (codes[:, None] * space.b + np.asarray(dom, dtype=np.int64)[None, :]).ravel()
        return codes

    def eval_indicators(self, bits: Sequence[int]) -> tuple[bool, ...]:
        """Truth value of each indicator on a (possibly non one-hot) bit vector."""
        if self.indicators is None:
            raise KnowledgeError("knowledge has no formula form")
        row = np.asarray(bits, dtype=bool)[None, :]
        return tuple(bool(evaluate_batch(ind.formula, row)[0]) for ind in self.indicators)

    def expected_indicators(self, y: LabelVector) -> tuple[bool, ...]:
        if self.indicators is None:
            raise KnowledgeError("knowledge has no formula form")
        return tuple(y[ind.position] == ind.value for ind in self.indicators)


def label_of(K: Knowledge, c: Sequence[int]) -> LabelVector:
    return K.label_of(c)


def _minterm(space: ConceptSpace, blocks: Sequence[int], values: Sequence[int]) -> BoolExpr:
    lits = [space.atom(j, v) for j, v in zip(blocks, values)]
    return lits[0] if len(lits) == 1 else And(*lits)


def enumerated_indicators(
    space: ConceptSpace,
    fn: Callable[[ConceptVector], LabelVector],
    label_domains: Sequence[Sequence[int]],
    depends_on: Sequence[Sequence[int]] | None = None,
    bound: int = DEFAULT_ENUMERATION_BOUND,
) -> tuple[Indicator, ...]:
    """Indicator formulas built as DNFs of one-hot minterms.

    ``depends_on[p]`` lists the concept blocks label ``p`` reads; only those
    are enumerated, which keeps e.g. per-equation formulas small. ``fn`` is
    called on full vectors with the other blocks set to 0.
    """
    n_labels = len(label_domains)
    if depends_on is None:
        depends_on = [range(space.k)] * n_labels
    out = []
    for p, domain in enumerate(label_domains):
        blocks = list(depends_on[p])
        require_enumerable(space.b ** len(blocks), bound, f"label {p} dependency space")
        by_value: dict[int, list[BoolExpr]] = {v: [] for v in domain}
        for vals in itertools.product(range(space.b), repeat=len(blocks)):
            c = [0] * space.k
            for j, v in zip(blocks, vals):
                c[j] = v
            y = fn(tuple(c))[p]
            if y not in by_value:
                raise KnowledgeError(f"label {p} value {y} outside declared domain")
            by_value[y].append(_minterm(space, blocks, vals))
        values = [1] if _is_boolean(domain) else list(domain)
        for v in values:
            terms = by_value[v]
            formula = Or(*terms) if terms else Or()
            out.append(Indicator(p, v, formula))
    return tuple(out)


def knowledge_from_function(
    space: ConceptSpace,
    fn: Callable[[ConceptVector], LabelVector],
    label_domains: Sequence[Sequence[int]] | None = None,
    *,
    with_formula: bool = True,
    depends_on: Sequence[Sequence[int]] | None = None,
    bound: int = DEFAULT_ENUMERATION_BOUND,
    **meta,
) -> Knowledge:
    """Knowledge from a python function; domains are inferred by enumeration."""
    if label_domains is None:
        require_enumerable(space.size, bound, "concept space")
        seen: list[set[int]] | None = None
        for c in space.vectors():
            y = fn(c)
            if seen is None:
                seen = [set() for _ in y]
            for s, v in zip(seen, y):
                s.add(v)
        label_domains = [sorted(s) for s in seen]
        label_domains = [(0, 1) if set(d) <= {0, 1} else d for d in label_domains]
    label_domains = tuple(tuple(d) for d in label_domains)
    indicators = None
    if with_formula:
        indicators = enumerated_indicators(space, fn, label_domains, depends_on, bound)
    return Knowledge(space, label_domains, fn, indicators, **meta)


def knowledge_from_formulas(
    space: ConceptSpace, formulas: Sequence[BoolExpr], **meta
) -> Knowledge:
    """Boolean-labelled knowledge given one bit formula per label.

    The label map is the formula evaluated on the one-hot encoding, so the
    two always agree.
    """
    formulas = tuple(formulas)
    indicators = tuple(Indicator(p, 1, f) for p, f in enumerate(formulas))

    def beta(c: ConceptVector) -> LabelVector:
        row = np.array(space.onehot(c), dtype=bool)[None, :]
        return tuple(int(evaluate_batch(f, row)[0]) for f in formulas)

    return Knowledge(space, ((0, 1),) * len(formulas), beta, indicators, **meta)


# ---------------------------------------------------------------------------
# Concept-level expressions


def lower_to_bits(e: BoolExpr, space: ConceptSpace) -> BoolExpr:
    """Turn a concept-level expression into a formula over one-hot bits.

    At concept level ATOM ``i`` means concept ``i - 1`` is non-zero and EQ
    compares concept values. For ``b == 2`` an atom becomes the value-1 bit;
    otherwise it is the negated value-0 bit.
    """
    memo: dict[BoolExpr, BoolExpr] = {}

    def term_bits(t, v):
        kind, x = t
        if kind == "var":
            return space.atom(x, v)
        return None if x != v else True

    def go(n: BoolExpr) -> BoolExpr:
        if n in memo:
            return memo[n]
        if n.kind is Kind.ATOM:
            j = n.value - 1
            if not 0 <= j < space.k:
                raise KnowledgeError(f"atom {n.value} outside {space.k} concepts")
            r = space.atom(j, 1) if space.b == 2 else Not(space.atom(j, 0))
        elif n.kind is Kind.EQ:
            lhs, rhs = n.value
            terms = []
            for v in range(space.b):
                a, b = term_bits(lhs, v), term_bits(rhs, v)
                if a is None or b is None:
                    continue
                parts = [x for x in (a, b) if x is not True]
                if not parts:
                    terms.append(And())
                else:
                    terms.append(parts[0] if len(parts) == 1 else And(*parts))
            r = terms[0] if len(terms) == 1 else Or(*terms)
        elif n.args:
            r = BoolExpr(n.kind, tuple(go(a) for a in n.args), n.value)
        else:
            r = n
        memo[n] = r
        return r

    return go(e)


def eval_concepts(e: BoolExpr, c: Sequence[int]) -> bool:
    """Evaluate a concept-level expression on a concept vector."""
    k = e.kind
    if k is Kind.ATOM:
        return c[e.value - 1] != 0
    if k is Kind.EQ:
        (ta, a), (tb, b) = e.value
        va = c[a] if ta == "var" else a
        vb = c[b] if tb == "var" else b
        return va == vb
    if k is Kind.CONST:
        return bool(e.value)
    if k is Kind.NOT:
        return not eval_concepts(e.args[0], c)
    if k is Kind.AND:
        return all(eval_concepts(x, c) for x in e.args)
    if k is Kind.OR:
        return any(eval_concepts(x, c) for x in e.args)
    if k is Kind.XOR:
        return sum(eval_concepts(x, c) for x in e.args) % 2 == 1
    if k is Kind.IFF:
        return eval_concepts(e.args[0], c) == eval_concepts(e.args[1], c)
    raise KnowledgeError(f"unknown node kind {k}")


def knowledge_from_concept_exprs(
    space: ConceptSpace, exprs: Sequence[BoolExpr], **meta
) -> Knowledge:
    """Boolean labels defined by concept-level expressions (atoms and EQ)."""
    exprs = tuple(exprs)
    indicators = tuple(Indicator(p, 1, lower_to_bits(e, space)) for p, e in enumerate(exprs))

    def beta(c: ConceptVector) -> LabelVector:
        return tuple(int(eval_concepts(e, c)) for e in exprs)

    return Knowledge(space, ((0, 1),) * len(exprs), beta, indicators, **meta)


# ---------------------------------------------------------------------------
# Supports


class _AllVectors(SequenceABC):
    """Lazy sequence of every vector in a space, in code order."""

    def __init__(self, space: ConceptSpace):
        self.space = space

    def __len__(self):
        return self.space.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self.space.decode(self.code_at(i))

    def code_at(self, i: int) -> int:
        return i

    def codes(self) -> np.ndarray:
        return np.arange(self.space.size, dtype=np.int64)

    def __iter__(self):
        return self.space.vectors()

    def __contains__(self, c):
        return self.space.contains(c)


class _CodeVectors(_AllVectors):
    """Lazy sequence over a sorted array of distinct codes."""

    def __init__(self, space: ConceptSpace, codes: np.ndarray):
        super().__init__(space)
        self._codes = codes

    def __len__(self):
        return len(self._codes)

    def code_at(self, i: int) -> int:
        return int(self._codes[i])

    def codes(self) -> np.ndarray:
        return self._codes

    def __iter__(self):
        return (self.space.decode(int(c)) for c in self._codes)

    def __contains__(self, c):
        if not self.space.contains(c):
            return False
        code = self.space.code(c)
        i = int(np.searchsorted(self._codes, code))
        return i < len(self._codes) and int(self._codes[i]) == code


class Support:
    """Ordered set of ground-truth concept vectors with their labels.

    Labels are always derived from the owning knowledge, so every entry is
    consistent by construction.
    """

    def __init__(self, knowledge: Knowledge, concepts: Iterable[Sequence[int]] | _AllVectors):
        self.knowledge = knowledge
        if isinstance(concepts, _AllVectors):
            self._concepts = concepts
            self._set = None
        else:
            vecs = [knowledge.space.check(c) for c in concepts]
            if len(set(vecs)) != len(vecs):
                raise KnowledgeError("support contains duplicate concept vectors")
            self._concepts = tuple(vecs)
            self._set = frozenset(vecs)

    @classmethod
    def exhaustive(cls, knowledge: Knowledge) -> "Support":
        return cls(knowledge, _AllVectors(knowledge.space))

    @classmethod
    def from_codes(cls, knowledge: Knowledge, codes) -> "Support":
        """Support backed by an array of concept codes, decoded lazily."""
        codes = np.asarray(codes, dtype=np.int64)
        uniq = np.unique(codes)
        if len(uniq) != len(codes):
            raise KnowledgeError("support contains duplicate concept vectors")
        if len(uniq) and (uniq[0] < 0 or uniq[-1] >= knowledge.space.size):
            raise KnowledgeError("support code outside the concept space")
        return cls(knowledge, _CodeVectors(knowledge.space, uniq))

    @property
    def is_exhaustive(self) -> bool:
        return len(self) == self.knowledge.space.size

    @property
    def concepts(self) -> Sequence[ConceptVector]:
        return self._concepts

    def __len__(self):
        return len(self._concepts)

    def __iter__(self):
        return iter(self._concepts)

    def __contains__(self, c):
        if self._set is None:
            return c in self._concepts
        return tuple(c) in self._set

    def entries(self) -> Iterator[tuple[ConceptVector, LabelVector]]:
        for c in self._concepts:
            yield c, self.knowledge.beta(c)

    def codes(self) -> np.ndarray:
        space = self.knowledge.space
        if isinstance(self._concepts, _AllVectors):
            return self._concepts.codes()
        return np.array([space.code(c) for c in self._concepts], dtype=np.int64)

    def restrict(self, keep: Callable[[ConceptVector], bool]) -> "Support":
        return Support(self.knowledge, [c for c in self._concepts if keep(c)])

    def __repr__(self):
        return f"Support({len(self)} of {self.knowledge.space.size} vectors)"


def exhaustive_support(K: Knowledge, bound: int = DEFAULT_ENUMERATION_BOUND) -> Support:
    """All ``b**k`` vectors, materialized (raises past ``bound``)."""
    require_enumerable(K.space.size, bound, "concept space")
    return Support(K, list(K.space.vectors()))


def equivalence_class(
    K: Knowledge, c: Sequence[int], bound: int = DEFAULT_ENUMERATION_BOUND
) -> set[ConceptVector]:
    """All vectors sharing the label of ``c``."""
    y = K.label_of(c)
    table = K.label_table(bound)
    return {K.space.decode(i) for i, y2 in enumerate(table) if y2 == y}


def class_sizes(K: Knowledge, bound: int = DEFAULT_ENUMERATION_BOUND) -> np.ndarray:
    """``|E(c)|`` for every concept code ``c``."""
    ids = K.label_ids(bound)
    return np.bincount(ids)[ids]


# ---------------------------------------------------------------------------
# Determinism


def label_bit_width(label_domains: Sequence[Sequence[int]]) -> int:
    return sum(1 if _is_boolean(d) else len(d) for d in label_domains)


def label_bits(y: Sequence[int], label_domains: Sequence[Sequence[int]]) -> list[bool]:
    """Bit encoding of a label vector: one bit per boolean position, one-hot otherwise."""
    bits: list[bool] = []
    for v, d in zip(y, label_domains):
        if _is_boolean(d):
            bits.append(bool(v))
        else:
            bits.extend(v == u for u in d)
    return bits


def check_determinism(
    rel: BoolExpr,
    space: ConceptSpace,
    label_domains: Sequence[Sequence[int]],
    bound: int = 1 << 26,
    chunk: int = 1 << 16,
) -> bool:
    """True iff every concept vector admits exactly one label vector under ``rel``.

    Atoms ``1 .. k*b`` of ``rel`` are the one-hot concept bits; label bits
    follow (see :func:`label_bits`). Checked by exhaustive enumeration.
    """
    label_domains = [tuple(d) for d in label_domains]
    label_vectors = list(itertools.product(*label_domains))
    require_enumerable(space.size * len(label_vectors), bound, "concept x label space")
    width = space.width + label_bit_width(label_domains)
    encoded = [np.array(label_bits(y, label_domains), dtype=bool) for y in label_vectors]
    for start in range(0, space.size, chunk):
        codes = np.arange(start, min(start + chunk, space.size), dtype=np.int64)
        concept_bits = space.onehot_matrix(codes)
        hits = np.zeros(len(codes), dtype=np.int64)
        bits = np.zeros((len(codes), width), dtype=bool)
        bits[:, : space.width] = concept_bits
        for lb in encoded:
            bits[:, space.width :] = lb
            hits += evaluate_batch(rel, bits)
        if np.any(hits != 1):
            return False
    return True
