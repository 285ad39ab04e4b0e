"""Builtin task families at the concept level."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..errors import KnowledgeError
from ..formula import (
    And,
    Atom,
    BoolExpr,
    CnfFormula,
    Eq,
    Iff,
    Not,
    Or,
    Xor,
    atoms,
    cnf_to_expr,
    random_lcnf,
)
from ..knowledge import (
    ConceptSpace,
    Knowledge,
    Support,
    knowledge_from_concept_exprs,
    knowledge_from_function,
)
from .boia import boia_knowledge


class Family(str, enum.Enum):
    MNLOGIC = "mnlogic"
    MNADD = "mnadd"
    MNADD_HALF = "mnadd-half"
    MNADD_EVENODD = "mnadd-evenodd"
    MNMATH = "mnmath"
    KAND = "kand"
    CLE4EVR = "cle4evr"
    BOIA = "boia"
    BOIA_OOD_EMERGENCY = "boia-ood"
    CUSTOM_CNF = "custom-cnf"


@dataclass(frozen=True)
class TaskSpec:
    family: Family
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))


class BuiltinTask(NamedTuple):
    space: ConceptSpace
    knowledge: Knowledge
    support: Support


KAND_SHAPES = ("square", "circle", "triangle")
KAND_COLORS = ("red", "yellow", "blue")
CLEVR_COLORS = ("gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow")
CLEVR_SHAPES = ("cube", "sphere", "cylinder", "cone", "torus", "pyramid", "ring", "star", "prism")
CLEVR_MATERIALS = ("rubber", "metal")
CLEVR_SIZES = ("large", "medium", "small")


def _param(params: dict, key: str, default=None, *, kind=None):
    v = params.get(key, default)
    if kind is int and v is not None and (isinstance(v, bool) or not isinstance(v, int)):
        raise KnowledgeError(f"parameter {key!r} must be an integer")
    return v


def builtin_task(spec: TaskSpec) -> BuiltinTask:
    """Knowledge plus the family's canonical training support.

    Builders return the knowledge and an optional filter over a matrix of
    concept values (one row per candidate vector) selecting the support.
    """
    builder = _BUILDERS[spec.family]
    K, keep = builder(dict(spec.params))
    full = K.concept_domains is None or all(len(d) == K.space.b for d in K.concept_domains)
    if keep is None and full:
        supp = Support.exhaustive(K)
    else:
        codes = K.candidate_codes()
        if keep is not None:
            codes = codes[keep(K.space.digits(codes))]
        if len(codes) == 0:
            raise KnowledgeError("the default support is empty")
        supp = Support.from_codes(K, codes)
    return BuiltinTask(K.space, K, supp)


# ---------------------------------------------------------------------------
# MNLogic


def preset_formula(name: str, k: int) -> BoolExpr:
    lits = [Atom(i) for i in range(1, k + 1)]
    if name == "xor":
        return Xor(*lits)
    if name == "and":
        return And(*lits)
    if name == "or":
        return Or(*lits)
    raise KnowledgeError(f"unknown preset formula {name!r}")


def mnlogic_knowledge(k: int, formula: BoolExpr, name: str = "mnlogic", **meta) -> Knowledge:
    """``y <-> formula`` over ``k`` binary concepts (atoms 1..k)."""
    if k < 1:
        raise KnowledgeError("need at least one bit")
    bad = [a for a in atoms(formula) if a > k]
    if bad:
        raise KnowledgeError(f"formula uses atom {max(bad)} but only {k} concepts exist")
    space = ConceptSpace(k, 2)
    return knowledge_from_concept_exprs(space, [formula], name=name, **meta)


def _build_mnlogic(p: dict):
    k = _param(p, "k", 3, kind=int)
    if "formula" in p and p["formula"] is not None:
        formula, name = p["formula"], "mnlogic"
    elif "clauses" in p:
        m = _param(p, "clauses", kind=int)
        width = _param(p, "width", 3, kind=int)
        seed = _param(p, "seed", 0, kind=int)
        try:
            cnf = random_lcnf(k, m, width, seed)
        except ValueError as e:
            raise KnowledgeError(str(e)) from None
        formula, name = cnf_to_expr(cnf), f"lcnf-{k}-{m}-{width}-{seed}"
    else:
        preset = p.get("preset", "xor")
        formula, name = preset_formula(preset, k), f"{preset}-{k}"
    names = p.get("symbols")
    return mnlogic_knowledge(k, formula, name=name, concept_names=_names(names, k)), None


def _build_custom_cnf(p: dict):
    cnf: CnfFormula = p["cnf"]
    if cnf.num_variables < 1:
        raise KnowledgeError("CNF knowledge needs at least one variable")
    return mnlogic_knowledge(cnf.num_variables, cnf_to_expr(cnf), name="custom-cnf"), None


def _names(names, k):
    if names is None:
        return None
    names = tuple(str(n) for n in names)
    if len(names) != k:
        raise KnowledgeError(f"expected {k} symbol names, got {len(names)}")
    return names


# ---------------------------------------------------------------------------
# Addition variants


def _digit_setup(p: dict):
    k = _param(p, "digits", 2, kind=int)
    b = _param(p, "b", 10, kind=int)
    if k < 2:
        raise KnowledgeError("addition needs at least two digits")
    if b < 2:
        raise KnowledgeError("digits need at least two values")
    values = tuple(sorted(set(p.get("digit_values", range(b)))))
    if not values:
        raise KnowledgeError("digit subset is empty")
    if values[0] < 0 or values[-1] >= b:
        raise KnowledgeError(f"digit values must lie in [0, {b})")
    return k, b, values


def mnadd_knowledge(k: int = 2, b: int = 10, digit_values=None, name: str = "mnadd") -> Knowledge:
    space = ConceptSpace(k, b)
    domains = None if digit_values is None else (tuple(digit_values),) * k
    return knowledge_from_function(
        space,
        lambda c: (sum(c),),
        [tuple(range(k * (b - 1) + 1))],
        name=name,
        label_names=("sum",),
        concept_domains=domains,
    )


def _build_mnadd(p: dict):
    k, b, values = _digit_setup(p)
    return mnadd_knowledge(k, b, values, "mnadd"), None


def _build_mnadd_half(p: dict):
    k, b, values = _digit_setup(p)
    half = tuple(p.get("half_values", range(b // 2)))
    if not half:
        raise KnowledgeError("half digit subset is empty")
    combos = p.get("combinations")
    K = mnadd_knowledge(k, b, values, "mnadd-half")
    if combos is not None:
        space = K.space
        allowed = np.asarray([space.code(c) for c in combos], dtype=np.int64)
        powers = space.b ** np.arange(space.k - 1, -1, -1, dtype=np.int64)
        return K, lambda d: np.isin(d @ powers, allowed)
    return K, lambda d: np.isin(d, half).all(axis=1)


def _build_mnadd_evenodd(p: dict):
    k, b, values = _digit_setup(p)
    K = mnadd_knowledge(k, b, values, "mnadd-evenodd")
    return K, lambda d: (d % 2 == d[:, :1] % 2).all(axis=1)


# ---------------------------------------------------------------------------
# MNMath


@dataclass(frozen=True)
class Equation:
    """One output of an equation system.

    ``fn`` maps the values of ``deps`` (concept indices) to an int; a
    ``boolean`` equation yields 0/1.
    """

    fn: Callable[..., int]
    deps: tuple[int, ...]
    boolean: bool = False
    text: str = ""


def linear_equation(coeffs: Sequence[int], deps: Sequence[int]) -> Equation:
    coeffs = tuple(coeffs)
    return Equation(lambda *v: sum(a * x for a, x in zip(coeffs, v)), tuple(deps))


def equal_sums(lhs: Sequence[int], rhs: Sequence[int]) -> Equation:
    """Indicator ``sum(lhs) == sum(rhs)``."""
    n = len(lhs)
    return Equation(lambda *v: int(sum(v[:n]) == sum(v[n:])), tuple(lhs) + tuple(rhs), True)


def equal_products(lhs: Sequence[int], rhs: Sequence[int]) -> Equation:
    n = len(lhs)

    def prod(xs):
        out = 1
        for x in xs:
            out *= x
        return out

    return Equation(lambda *v: int(prod(v[:n]) == prod(v[n:])), tuple(lhs) + tuple(rhs), True)


def mnmath_knowledge(k: int, b: int, equations: Sequence[Equation], digit_values=None, symbols=None) -> Knowledge:
    if not equations:
        raise KnowledgeError("equation system is empty")
    space = ConceptSpace(k, b)
    domains = []
    for e in equations:
        if any(not 0 <= j < k for j in e.deps):
            raise KnowledgeError(f"equation reads a concept outside 0..{k - 1}")
        if e.boolean:
            domains.append((0, 1))
        else:
            vals = {int(e.fn(*v)) for v in itertools.product(range(b), repeat=len(e.deps))}
            domains.append(tuple(sorted(vals)))

    def beta(c):
        return tuple(int(e.fn(*(c[j] for j in e.deps))) for e in equations)

    return knowledge_from_function(
        space,
        beta,
        domains,
        depends_on=[e.deps for e in equations],
        name="mnmath",
        concept_names=_names(symbols, k),
        concept_domains=None if digit_values is None else (tuple(digit_values),) * k,
    )


def _build_mnmath(p: dict):
    variant = p.get("variant")
    b = _param(p, "b", 10, kind=int)
    if variant == "indicator":
        # two 4-digit checks: x1 + x2 == x3 + x4 and x5 * x6 == x7 * x8
        k = 8
        eqs = [equal_sums([0, 1], [2, 3]), equal_products([4, 5], [6, 7])]
    elif "equations" in p:
        eqs = list(p["equations"])
        k = _param(p, "digits", kind=int)
        if k is None:
            k = 1 + max(j for e in eqs for j in e.deps)
    else:
        k = 4
        eqs = [linear_equation([2, 1], [0, 1]), linear_equation([1, 1], [2, 3])]
    values = p.get("digit_values")
    return mnmath_knowledge(k, b, eqs, values, p.get("symbols")), None


# ---------------------------------------------------------------------------
# Kand-Logic


def _pairs(n):
    return list(itertools.combinations(range(n), 2))


def kand_predicates(concepts: Sequence[int]) -> dict[str, BoolExpr]:
    """same / diff / two predicates over one attribute of a figure's primitives."""
    eqs = [Eq(("var", concepts[a]), ("var", concepts[b])) for a, b in _pairs(len(concepts))]
    if not eqs:
        return {"same": And(), "diff": And(), "two": Or()}
    same = And(*eqs)
    diff = And(*(Not(e) for e in eqs))
    return {"same": same, "diff": diff, "two": And(Not(same), Not(diff))}


def kand_default_pattern(n_figures: int, n_shapes: int) -> BoolExpr:
    """Every figure satisfies the same same/two/diff predicate for color, or for shape."""
    disjuncts = []
    for attr in (1, 0):  # color, then shape
        per_fig = []
        for f in range(n_figures):
            base = 2 * n_shapes * f
            per_fig.append(kand_predicates([base + 2 * p + attr for p in range(n_shapes)]))
        for pred in ("diff", "two", "same"):
            disjuncts.append(And(*(fig[pred] for fig in per_fig)))
    return Or(*disjuncts)


def _kand_layout(p: dict):
    n_figures = _param(p, "n_figures", 2, kind=int)
    n_shapes = _param(p, "n_shapes", 3, kind=int)
    shapes = tuple(p.get("shapes", KAND_SHAPES))
    colors = tuple(p.get("colors", KAND_COLORS))
    if n_figures < 1 or n_shapes < 1:
        raise KnowledgeError("need at least one figure and one primitive")
    if len(shapes) < 1 or len(colors) < 1 or max(len(shapes), len(colors)) < 2:
        raise KnowledgeError("need at least two shapes or colors")
    return n_figures, n_shapes, shapes, colors


def kand_knowledge(p: dict) -> Knowledge:
    n_figures, n_shapes, shapes, colors = _kand_layout(p)
    b = max(len(shapes), len(colors))
    k = 2 * n_shapes * n_figures
    space = ConceptSpace(k, b)
    pattern = p.get("pattern") or kand_default_pattern(n_figures, n_shapes)
    names, value_names, domains = [], [], []
    for f in range(n_figures):
        for q in range(n_shapes):
            names += [f"shape_{f + 1}_{q + 1}", f"color_{f + 1}_{q + 1}"]
            value_names += [shapes, colors]
            domains += [tuple(range(len(shapes))), tuple(range(len(colors)))]
    return knowledge_from_concept_exprs(
        space,
        [pattern],
        name="kand",
        concept_names=tuple(names),
        label_names=("pattern",),
        value_names=tuple(value_names),
        concept_domains=tuple(domains),
    )


def _build_kand(p: dict):
    return kand_knowledge(p), None


# ---------------------------------------------------------------------------
# CLE4EVR


def _attr_names(v, default):
    if v is None:
        return default
    if isinstance(v, int) and not isinstance(v, bool):
        return tuple(f"v{i}" for i in range(v))
    return tuple(v)


def cle4evr_layout(p: dict):
    """Per-object attributes in order color, shape, material, size."""
    n_objects = _param(p, "n_objects", 2, kind=int)
    if n_objects < 2:
        raise KnowledgeError("need at least two objects")
    attrs = [("color", _attr_names(p.get("colors"), CLEVR_COLORS)), ("shape", _attr_names(p.get("shapes"), CLEVR_SHAPES))]
    if p.get("materials") is not None:
        attrs.append(("mat", _attr_names(p["materials"], CLEVR_MATERIALS)))
    if p.get("sizes") is not None:
        attrs.append(("size", _attr_names(p["sizes"], CLEVR_SIZES)))
    for name, vals in attrs:
        if not vals:
            raise KnowledgeError(f"attribute {name} has no values")
    return n_objects, attrs


def cle4evr_default_rule(n_objects: int, n_attrs: int) -> BoolExpr:
    """Some two objects share both color and shape."""
    pairs = []
    for i, j in _pairs(n_objects):
        ci, cj = i * n_attrs, j * n_attrs
        pairs.append(And(Eq(("var", ci), ("var", cj)), Eq(("var", ci + 1), ("var", cj + 1))))
    return pairs[0] if len(pairs) == 1 else Or(*pairs)


def cle4evr_knowledge(p: dict) -> Knowledge:
    n_objects, attrs = cle4evr_layout(p)
    b = max(2, max(len(v) for _, v in attrs))
    k = n_objects * len(attrs)
    space = ConceptSpace(k, b)
    rule = p.get("rule") or cle4evr_default_rule(n_objects, len(attrs))
    names = tuple(f"{a}_{o + 1}" for o in range(n_objects) for a, _ in attrs)
    value_names = tuple(v for _ in range(n_objects) for _, v in attrs)
    domains = tuple(tuple(range(len(v))) for _ in range(n_objects) for _, v in attrs)
    return knowledge_from_concept_exprs(
        space,
        [rule],
        name="cle4evr",
        concept_names=names,
        label_names=("label",),
        value_names=value_names,
        concept_domains=domains,
    )


def _build_cle4evr(p: dict):
    return cle4evr_knowledge(p), None


def _build_boia(p: dict):
    return boia_knowledge(False), None


def _build_boia_ood(p: dict):
    # training scenes never contain an emergency
    return boia_knowledge(True), lambda d: d[:, -1] == 0


_BUILDERS = {
    Family.MNLOGIC: _build_mnlogic,
    Family.MNADD: _build_mnadd,
    Family.MNADD_HALF: _build_mnadd_half,
    Family.MNADD_EVENODD: _build_mnadd_evenodd,
    Family.MNMATH: _build_mnmath,
    Family.KAND: _build_kand,
    Family.CLE4EVR: _build_cle4evr,
    Family.BOIA: _build_boia,
    Family.BOIA_OOD_EMERGENCY: _build_boia_ood,
    Family.CUSTOM_CNF: _build_custom_cnf,
}


# ---------------------------------------------------------------------------
# Task names


_LIST_KEYS = {"digit_values", "half_values"}


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        return [_coerce(t) for t in text.split("/")]
    return text


def parse_task_name(name: str) -> TaskSpec:
    """Parse ``family[:key=value,...]``.

    Shorthands: ``xor-3``, ``and-3``, ``or-3`` and ``lcnf-K-M-L-SEED`` are
    MNLogic instances. List values use ``/`` (``digit_values=0/2/4``).
    """
    base, _, rest = name.partition(":")
    params: dict = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise KnowledgeError(f"malformed task parameter {item!r}")
        key, value = key.strip(), _coerce(val.strip())
        if key in _LIST_KEYS and not isinstance(value, list):
            value = [value]
        params[key] = value
    head, _, tail = base.partition("-")
    if head in ("xor", "and", "or") and tail.isdigit():
        return TaskSpec(Family.MNLOGIC, {"preset": head, "k": int(tail), **params})
    if head == "lcnf":
        parts = tail.split("-")
        if len(parts) != 4 or not all(x.isdigit() for x in parts):
            raise KnowledgeError("expected lcnf-K-M-L-SEED")
        k, m, l, seed = map(int, parts)
        return TaskSpec(Family.MNLOGIC, {"k": k, "clauses": m, "width": l, "seed": seed, **params})
    try:
        family = Family(base)
    except ValueError:
        raise KnowledgeError(f"unknown task {name!r}") from None
    if family is Family.CUSTOM_CNF:
        raise KnowledgeError("custom CNF tasks are loaded from a file")
    return TaskSpec(family, params)
