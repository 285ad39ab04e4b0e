"""YAML task configuration.

Formulas in ``logic`` are parsed with sympy and translated into
:class:`BoolExpr` trees at the concept level (``Eq``/``Ne`` compare concept
values). Arithmetic outputs (equation systems) become :class:`Equation`
objects evaluated through ``sympy.lambdify``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import sympy
import yaml
from sympy.logic import boolalg
from sympy.parsing.sympy_parser import parse_expr

from ..errors import ConfigError, KnowledgeError
from ..formula import And, Atom, BoolExpr, Const, Eq, Iff, Implies, Kind, Not, Or, Xor
from ..knowledge import DEFAULT_ENUMERATION_BOUND, Knowledge, require_enumerable
from .builtin import (
    CLEVR_MATERIALS,
    CLEVR_SIZES,
    BuiltinTask,
    Equation,
    Family,
    TaskSpec,
    builtin_task,
    cle4evr_layout,
)

SHARED_KEYS = {
    "task",
    "symbols",
    "logic",
    "prop_in_distribution",
    "combinations_in_distribution",
    "val_prop",
    "test_prop",
    "n_samples",
    "seed",
}
FAMILY_KEYS = {
    Family.MNLOGIC: {"n_digits", "xor_rule", "use_mnist"},
    Family.MNADD: {"num_digits", "digit_values"},
    Family.MNADD_HALF: {"num_digits", "digit_values", "half_values"},
    Family.MNADD_EVENODD: {"num_digits", "digit_values"},
    Family.MNMATH: {"num_digits", "digit_values", "variant"},
    Family.KAND: {"n_shapes", "n_figures", "colors", "shapes", "aggregator_symbols", "aggregator_logic"},
    Family.CLE4EVR: {"n_objects", "colors", "shapes", "materials", "sizes"},
    Family.BOIA: set(),
    Family.BOIA_OOD_EMERGENCY: set(),
}
# keys that identify a family when ``task`` is absent
_HINTS = (
    ("n_digits", Family.MNLOGIC),
    ("xor_rule", Family.MNLOGIC),
    ("num_digits", Family.MNMATH),
    ("n_figures", Family.KAND),
    ("n_shapes", Family.KAND),
    ("aggregator_logic", Family.KAND),
    ("n_objects", Family.CLE4EVR),
    ("materials", Family.CLE4EVR),
    ("sizes", Family.CLE4EVR),
)


@dataclass
class TaskConfig:
    spec: TaskSpec
    n_samples: int = 100
    val_prop: float = 0.2
    test_prop: float = 0.2
    prop_in_distribution: float = 1.0
    combinations_in_distribution: tuple[tuple[int, ...], ...] | None = None
    seed: int = 0
    text: str = field(default="", repr=False)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples", "must be positive")
        for key in ("val_prop", "test_prop"):
            v = getattr(self, key)
            if not 0 <= v < 1:
                raise ConfigError(key, "must lie in [0, 1)")
        if self.val_prop + self.test_prop >= 1:
            raise ConfigError("val_prop", "val_prop + test_prop must be below 1")
        if not 0 < self.prop_in_distribution <= 1:
            raise ConfigError("prop_in_distribution", "must lie in (0, 1]")

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def task(self) -> BuiltinTask:
        cached = self.__dict__.get("_task")
        if cached is not None and cached[0] is self.spec:
            return cached[1]
        try:
            task = builtin_task(self.spec)
        except KnowledgeError as e:
            raise ConfigError("task", str(e)) from None
        self.__dict__["_task"] = (self.spec, task)
        return task


# ---------------------------------------------------------------------------
# sympy translation


class _Scope:
    """Symbol names of one formula and how they map to concepts."""

    def __init__(self, names, value_names=None, bound=None):
        self.index = {n: i for i, n in enumerate(names)}
        self.value_names = value_names or {}
        # names bound to already-built expressions (aggregator variables)
        self.bound = bound or {}

    def symbols(self):
        return {n: sympy.Symbol(n) for n in list(self.index) + list(self.bound)}


def parse_sympy(text: str, scope: _Scope, path: str):
    if not isinstance(text, str):
        raise ConfigError(path, "formula must be a string")
    local = scope.symbols()
    local.update({"Eq": sympy.Eq, "Ne": sympy.Ne, "Xor": sympy.Xor, "Equivalent": sympy.Equivalent})
    try:
        return parse_expr(text, local_dict=local, evaluate=False)
    except Exception as e:  # sympy raises a zoo of types here
        raise ConfigError(path, f"malformed formula: {e}") from None


def _term(node, scope: _Scope, other, path):
    """One side of an Eq: a concept variable or an integer constant."""
    if isinstance(node, sympy.Symbol):
        name = node.name
        if name in scope.index:
            return ("var", scope.index[name])
        # a value name like ``red``, resolved against the other side
        if other is not None and isinstance(other, sympy.Symbol) and other.name in scope.index:
            names = scope.value_names.get(scope.index[other.name]) or ()
            if name in names:
                return ("const", names.index(name))
        raise ConfigError(path, f"unknown symbol {name!r}")
    if isinstance(node, sympy.Integer):
        return ("const", int(node))
    return None


def to_boolexpr(node, scope: _Scope, path: str) -> BoolExpr:
    """Translate a sympy boolean into a concept-level BoolExpr."""
    if node is sympy.true or node is True:
        return Const(True)
    if node is sympy.false or node is False:
        return Const(False)
    if isinstance(node, sympy.Symbol):
        if node.name in scope.bound:
            return scope.bound[node.name]
        if node.name not in scope.index:
            raise ConfigError(path, f"unknown symbol {node.name!r}")
        return Atom(scope.index[node.name] + 1)
    if isinstance(node, (sympy.Eq, sympy.Ne)):
        lhs, rhs = node.args
        a = _term(lhs, scope, rhs, path)
        b = _term(rhs, scope, lhs, path)
        if a is None or b is None:
            raise ConfigError(path, f"Eq/Ne only compare symbols and integers: {node}")
        e = Eq(a, b)
        return e if isinstance(node, sympy.Eq) else Not(e)
    args = [to_boolexpr(a, scope, path) for a in node.args]
    if isinstance(node, boolalg.Not):
        return Not(args[0])
    if isinstance(node, boolalg.And):
        return And(*args)
    if isinstance(node, boolalg.Or):
        return Or(*args)
    if isinstance(node, boolalg.Xor):
        return Xor(*args)
    if isinstance(node, boolalg.Implies):
        return Implies(*args)
    if isinstance(node, boolalg.Equivalent):
        if len(args) == 2:
            return Iff(*args)
        return And(*(Iff(args[0], a) for a in args[1:]))
    raise ConfigError(path, f"unsupported construct {type(node).__name__} in {node}")


def to_equation(node, scope: _Scope, path: str) -> Equation:
    """An arithmetic or relational output over integer concepts."""
    free = sorted(node.free_symbols, key=lambda s: s.name)
    for s in free:
        if s.name not in scope.index:
            raise ConfigError(path, f"unknown symbol {s.name!r}")
    free.sort(key=lambda s: scope.index[s.name])
    deps = tuple(scope.index[s.name] for s in free)
    boolean = isinstance(node, (sympy.logic.boolalg.Boolean, sympy.core.relational.Relational))
    fn = sympy.lambdify(free, node, modules="math")

    def call(*vals):
        out = fn(*vals)
        if boolean:
            return int(bool(out))
        if out != int(out):
            raise KnowledgeError(f"{node} is not integer-valued at {vals}")
        return int(out)

    return Equation(call, deps, boolean, str(node))


# ---------------------------------------------------------------------------
# parsing


def _get_int(data, key, default=None, *, minimum=None):
    v = data.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, "must be an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(key, f"must be at least {minimum}")
    return v


def _get_frac(data, key, default):
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, "must be a number")
    return float(v)


def _get_names(data, key, required=None):
    v = data.get(key)
    if v is None:
        return None
    if not isinstance(v, list) or not all(isinstance(x, (str, int)) for x in v):
        raise ConfigError(key, "must be a list of names")
    names = [str(x) for x in v]
    if len(set(names)) != len(names):
        raise ConfigError(key, "names must be distinct")
    if required is not None and len(names) != required:
        raise ConfigError(key, f"expected {required} entries, got {len(names)}")
    return names


def _family(data) -> Family:
    if "task" in data:
        try:
            return Family(str(data["task"]))
        except ValueError:
            raise ConfigError("task", f"unknown task {data['task']!r}") from None
    for key, fam in _HINTS:
        if key in data:
            return fam
    raise ConfigError("task", "cannot infer the task family; add a 'task' key")


def parse_config(text: str) -> TaskConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("<root>", f"invalid YAML: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    family = _family(data)
    if family is Family.CUSTOM_CNF:
        raise ConfigError("task", "custom CNF tasks are loaded from DIMACS, not configs")
    allowed = SHARED_KEYS | FAMILY_KEYS[family]
    for key in data:
        if key not in allowed:
            raise ConfigError(str(key), f"unknown key for task {family.value}")

    params = _FAMILY_PARSERS[family](data)
    spec = TaskSpec(family, params)
    cfg = TaskConfig(
        spec=spec,
        n_samples=_get_int(data, "n_samples", 100, minimum=1),
        val_prop=_get_frac(data, "val_prop", 0.2),
        test_prop=_get_frac(data, "test_prop", 0.2),
        prop_in_distribution=_get_frac(data, "prop_in_distribution", 1.0),
        seed=_get_int(data, "seed", 0),
        text=text,
    )
    task = cfg.task()
    if "combinations_in_distribution" in data:
        cfg.combinations_in_distribution = parse_combinations(
            data["combinations_in_distribution"], task.knowledge, "combinations_in_distribution"
        )
    check_degenerate(task.knowledge, in_distribution_pool(cfg, task), "logic")
    return cfg


def _mnlogic(data):
    k = _get_int(data, "n_digits", 3, minimum=1)
    names = _get_names(data, "symbols", k) or [f"c{i + 1}" for i in range(k)]
    xor_rule = data.get("xor_rule", "logic" not in data)
    if not isinstance(xor_rule, bool):
        raise ConfigError("xor_rule", "must be true or false")
    params: dict[str, Any] = {"k": k, "symbols": names}
    if xor_rule:
        if "logic" in data:
            raise ConfigError("logic", "xor_rule is set; drop logic or set xor_rule: false")
        params["preset"] = "xor"
    else:
        if "logic" not in data:
            raise ConfigError("logic", "required when xor_rule is false")
        scope = _Scope(names)
        params["formula"] = to_boolexpr(parse_sympy(data["logic"], scope, "logic"), scope, "logic")
    return params


def _digit_values(data, b=10):
    v = data.get("digit_values")
    if v is None:
        return None
    if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError("digit_values", "must be a non-empty list of integers")
    if any(not 0 <= x < b for x in v):
        raise ConfigError("digit_values", f"digits must lie in [0, {b})")
    return sorted(set(v))


def _mnadd(data):
    k = _get_int(data, "num_digits", 2, minimum=2)
    if "logic" in data:
        raise ConfigError("logic", "addition tasks have fixed knowledge")
    params: dict[str, Any] = {"digits": k}
    values = _digit_values(data)
    if values is not None:
        params["digit_values"] = values
    if "half_values" in data:
        half = _digit_values({"digit_values": data["half_values"]})
        params["half_values"] = half
    return params


def _mnmath(data):
    k = _get_int(data, "num_digits", 2, minimum=1)
    names = _get_names(data, "symbols", k) or [f"x{i + 1}" for i in range(k)]
    params: dict[str, Any] = {"digits": k, "symbols": names}
    values = _digit_values(data)
    if values is not None:
        params["digit_values"] = values
    if data.get("variant") is not None:
        if data["variant"] != "indicator":
            raise ConfigError("variant", "only 'indicator' is supported")
        if "logic" in data:
            raise ConfigError("logic", "the indicator variant has fixed equations")
        params["variant"] = "indicator"
        return params
    logic = data.get("logic")
    if logic is None:
        raise ConfigError("logic", "required")
    if isinstance(logic, str):
        logic = [logic]
    if not isinstance(logic, list) or not logic:
        raise ConfigError("logic", "must be a list of equations")
    scope = _Scope(names)
    eqs = []
    for i, item in enumerate(logic):
        path = f"logic[{i}]"
        node = parse_sympy(str(item), scope, path)
        eqs.append(to_equation(node, scope, path))
    params["equations"] = eqs
    return params


def _kand(data):
    n_shapes = _get_int(data, "n_shapes", 3, minimum=1)
    n_figures = _get_int(data, "n_figures", 2, minimum=1)
    shapes = _get_names(data, "shapes")
    colors = _get_names(data, "colors")
    params: dict[str, Any] = {"n_shapes": n_shapes, "n_figures": n_figures}
    if shapes is not None:
        params["shapes"] = shapes
    if colors is not None:
        params["colors"] = colors
    per_fig = 2 * n_shapes
    names = _get_names(data, "symbols", per_fig) or [
        f"{a}_{q + 1}" for q in range(n_shapes) for a in ("shape", "color")
    ]
    if "logic" not in data:
        if "aggregator_logic" in data:
            raise ConfigError("aggregator_logic", "needs a per-figure logic")
        return params
    shape_names = shapes or ["square", "circle", "triangle"]
    color_names = colors or ["red", "yellow", "blue"]
    value_names = {i: (shape_names if i % 2 == 0 else color_names) for i in range(per_fig)}
    scope = _Scope(names, value_names)
    figure = to_boolexpr(parse_sympy(data["logic"], scope, "logic"), scope, "logic")
    # move each figure's copy onto its own block of concepts
    per_figure = [_shift_concepts(figure, f * per_fig) for f in range(n_figures)]
    agg_names = _get_names(data, "aggregator_symbols", n_figures) or [f"pattern_{f + 1}" for f in range(n_figures)]
    if "aggregator_logic" in data:
        agg_scope = _Scope([], bound=dict(zip(agg_names, per_figure)))
        pattern = to_boolexpr(parse_sympy(data["aggregator_logic"], agg_scope, "aggregator_logic"), agg_scope, "aggregator_logic")
    else:
        pattern = And(*per_figure)
    params["pattern"] = pattern
    return params


def _shift_concepts(e: BoolExpr, offset: int) -> BoolExpr:
    def go(n: BoolExpr) -> BoolExpr:
        if n.kind is Kind.ATOM:
            return Atom(n.value + offset)
        if n.kind is Kind.EQ:
            return Eq(*(("var", x + offset) if t == "var" else (t, x) for t, x in n.value))
        if n.args:
            return BoolExpr(n.kind, tuple(go(a) for a in n.args), n.value)
        return n

    return go(e) if offset else e


def _cle4evr(data):
    params: dict[str, Any] = {}
    n_objects = _get_int(data, "n_objects", 2, minimum=2)
    params["n_objects"] = n_objects
    for key in ("colors", "shapes", "materials", "sizes"):
        v = data.get(key)
        if v is None:
            continue
        if isinstance(v, int) and not isinstance(v, bool):
            if v < 1:
                raise ConfigError(key, "must be positive")
            params[key] = v
        else:
            params[key] = _get_names(data, key)
    names = _get_names(data, "symbols")
    if names is not None:
        if len(names) % n_objects:
            raise ConfigError("symbols", f"expected a multiple of n_objects={n_objects} names")
        per = len(names) // n_objects
        if not 2 <= per <= 4:
            raise ConfigError("symbols", "each object has 2 to 4 attributes (color, shape, material, size)")
        if per >= 3:
            params.setdefault("materials", list(CLEVR_MATERIALS))
        if per == 4:
            params.setdefault("sizes", list(CLEVR_SIZES))
    try:
        _, attrs = cle4evr_layout(params)
    except KnowledgeError as e:
        raise ConfigError("symbols", str(e)) from None
    if names is None:
        names = [f"{a}_{o + 1}" for o in range(n_objects) for a, _ in attrs]
    elif len(names) != n_objects * len(attrs):
        raise ConfigError("symbols", f"expected {n_objects * len(attrs)} names")
    if "logic" in data:
        value_names = {i: attrs[i % len(attrs)][1] for i in range(len(names))}
        scope = _Scope(names, value_names)
        params["rule"] = to_boolexpr(parse_sympy(data["logic"], scope, "logic"), scope, "logic")
    return params


def _boia(data):
    if "logic" in data or "symbols" in data:
        raise ConfigError("logic", "driving tasks have fixed knowledge")
    return {}


_FAMILY_PARSERS = {
    Family.MNLOGIC: _mnlogic,
    Family.MNADD: _mnadd,
    Family.MNADD_HALF: _mnadd,
    Family.MNADD_EVENODD: _mnadd,
    Family.MNMATH: _mnmath,
    Family.KAND: _kand,
    Family.CLE4EVR: _cle4evr,
    Family.BOIA: _boia,
    Family.BOIA_OOD_EMERGENCY: _boia,
}


# ---------------------------------------------------------------------------
# combinations and degeneracy


def _resolve_token(tok, j: int, K: Knowledge, path: str) -> int:
    if isinstance(tok, bool):
        return int(tok)
    if isinstance(tok, int):
        v = tok
    else:
        tok = str(tok).strip()
        names = (K.value_names or [None] * K.space.k)[j] or ()
        if tok in names:
            v = names.index(tok)
        elif tok.lower() in ("true", "false"):
            v = int(tok.lower() == "true")
        else:
            try:
                v = int(tok)
            except ValueError:
                raise ConfigError(path, f"unknown value {tok!r} for concept {j}") from None
    domain = (K.concept_domains or [range(K.space.b)] * K.space.k)[j]
    if v not in domain:
        raise ConfigError(path, f"value {v} outside the domain of concept {j}")
    return v


def _tokens(item) -> list:
    if isinstance(item, str):
        s = item.strip()
        if "," in s:
            return [t.strip() for t in s.split(",")]
        if s.isdigit():
            return [int(ch) for ch in s]
        return [s]
    if isinstance(item, (list, tuple)):
        return [t for x in item for t in _tokens(x)]
    return [item]


def parse_combinations(raw, K: Knowledge, path: str) -> tuple[tuple[int, ...], ...]:
    """Patterns as digit strings (``"0101"``), lists of values or value names.

    A ``"red, square"`` string names the attributes of one primitive; its
    tokens may come in either order.
    """
    if not isinstance(raw, list) or not raw:
        raise ConfigError(path, "must be a non-empty list of patterns")
    out = []
    k = K.space.k
    for i, item in enumerate(raw):
        p = f"{path}[{i}]"
        if isinstance(item, list) and item and all(isinstance(x, str) and "," in x for x in item):
            toks = _grouped(item, K, p)
        else:
            toks = _tokens(item)
            if len(toks) != k:
                raise ConfigError(p, f"expected {k} values, got {len(toks)}")
            toks = [_resolve_token(t, j, K, p) for j, t in enumerate(toks)]
        out.append(tuple(toks))
    return tuple(dict.fromkeys(out))


def _grouped(item: list, K: Knowledge, path: str) -> list[int]:
    k = K.space.k
    groups = [[t.strip() for t in s.split(",")] for s in item]
    width = len(groups[0])
    if any(len(g) != width for g in groups) or width * len(groups) != k:
        raise ConfigError(path, f"expected {k} values in groups of equal size")
    names = K.value_names or [None] * k
    out: list[int] = []
    for g_idx, group in enumerate(groups):
        base = g_idx * width
        slots: list[int | None] = [None] * width
        for tok in group:
            fits = [s for s in range(width) if slots[s] is None and tok in (names[base + s] or ())]
            if not fits:
                raise ConfigError(path, f"value {tok!r} does not fit primitive {g_idx + 1}")
            slots[fits[0]] = (names[base + fits[0]] or ()).index(tok)
        out.extend(slots)  # type: ignore[arg-type]
    return out


def in_distribution_pool(cfg: TaskConfig, task: BuiltinTask | None = None) -> np.ndarray:
    """Concept codes allowed in train/val/test."""
    task = task or cfg.task()
    if cfg.combinations_in_distribution is not None:
        space = task.space
        return np.asarray([space.code(c) for c in cfg.combinations_in_distribution], dtype=np.int64)
    require_enumerable(len(task.support), DEFAULT_ENUMERATION_BOUND, "in-distribution pool")
    return task.support.codes()


def check_degenerate(K: Knowledge, codes: np.ndarray, path: str) -> None:
    """Reject knowledge whose labels are constant over the candidate pool."""
    if len(codes) == 0:
        raise ConfigError(path, "no candidate concept combinations")
    labels = K.labels_batch(codes)
    for p, dom in enumerate(K.label_domains):
        col = labels[:, p]
        if (col == col[0]).all():
            name = K.label_names[p] if K.label_names else f"label {p}"
            if tuple(dom) == (0, 1):
                state = "all true" if col[0] else "all false"
            else:
                state = f"all equal to {int(col[0])}"
            raise ConfigError(path, f"degenerate knowledge: {name} is {state} over the candidate combinations")


def load_config(path: str) -> TaskConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


__all__ = [
    "TaskConfig",
    "parse_config",
    "load_config",
    "parse_combinations",
    "check_degenerate",
    "in_distribution_pool",
    "to_boolexpr",
    "to_equation",
]
