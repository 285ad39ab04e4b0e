"""Concept-quality metrics: confusion matrices, collapse and F1 scores."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError
from .knowledge import ConceptSpace


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple[int, ...]  # sorted union of observed codes
    counts: np.ndarray  # rows ground truth, columns predicted

    @property
    def m(self) -> int:
        return len(self.labels)


def _check_lengths(gt, pred) -> None:
    if len(gt) != len(pred):
        raise ValueError(f"length mismatch: {len(gt)} ground-truth vs {len(pred)} predicted")


def encode_codes(vectors: Sequence[Sequence[int]], space: ConceptSpace, positions: Sequence[int] | None = None) -> list[int]:
    """Base-``b`` code of each vector, optionally after projecting onto ``positions``."""
    if positions is None:
        return [space.code(v) for v in vectors]
    sub = ConceptSpace(len(positions), space.b)
    return [sub.code([v[p] for p in positions]) for v in vectors]


def confusion_matrix(
    gt: Sequence[Sequence[int]],
    pred: Sequence[Sequence[int]],
    space: ConceptSpace,
    positions: Sequence[int] | None = None,
) -> ConfusionMatrix:
    """Confusion matrix over concept codes.

    ``positions`` restricts both sides to a subset of concepts first, which
    gives the per-attribute matrices (e.g. colors only).
    """
    _check_lengths(gt, pred)
    g = encode_codes(gt, space, positions)
    p = encode_codes(pred, space, positions)
    return confusion_from_codes(g, p)


def confusion_from_codes(gt: Sequence[int], pred: Sequence[int]) -> ConfusionMatrix:
    _check_lengths(gt, pred)
    labels = tuple(sorted(set(gt) | set(pred)))
    index = {c: i for i, c in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for a, b in zip(gt, pred):
        counts[index[a], index[b]] += 1
    return ConfusionMatrix(labels, counts)


def collapse(cm: ConfusionMatrix) -> float:
    """``1 - p/m`` with ``p`` the number of predicted codes actually used."""
    if cm.m == 0:
        raise ValueError("empty confusion matrix")
    used = int((cm.counts.sum(axis=0) > 0).sum())
    return 1.0 - used / cm.m


def _f1(tp: int, fp: int, fn: int) -> float:
    # no positives on either side: defined as 0
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def per_class_f1(gt: Sequence, pred: Sequence, classes: Iterable) -> dict:
    _check_lengths(gt, pred)
    out = {}
    for c in classes:
        tp = sum(1 for a, b in zip(gt, pred) if a == c and b == c)
        fp = sum(1 for a, b in zip(gt, pred) if a != c and b == c)
        fn = sum(1 for a, b in zip(gt, pred) if a == c and b != c)
        out[c] = _f1(tp, fp, fn)
    return out


def macro_f1(gt: Sequence, pred: Sequence, classes: Iterable | None = None) -> float:
    """Unweighted mean of per-class F1; classes default to the observed union."""
    if classes is None:
        classes = sorted(set(gt) | set(pred))
    scores = per_class_f1(gt, pred, list(classes))
    if not scores:
        raise ValueError("no classes")
    return sum(scores.values()) / len(scores)


def _columns(gt, pred):
    _check_lengths(gt, pred)
    if not gt:
        raise ValueError("no samples")
    widths = {len(v) for v in gt} | {len(v) for v in pred}
    if len(widths) != 1:
        raise ValueError(f"width mismatch: {sorted(widths)}")
    return widths.pop()


def mean_f1(gt: Sequence[Sequence[int]], pred: Sequence[Sequence[int]]) -> float:
    """Binary F1 of the positive class at each position, averaged over positions."""
    width = _columns(gt, pred)
    scores = []
    for p in range(width):
        g = [int(v[p]) for v in gt]
        q = [int(v[p]) for v in pred]
        scores.append(per_class_f1(g, q, [1])[1])
    return sum(scores) / width


def accuracy(gt: Sequence[Sequence[int]], pred: Sequence[Sequence[int]]) -> float:
    """Per-position accuracy averaged uniformly over positions."""
    width = _columns(gt, pred)
    n = len(gt)
    per_pos = [sum(1 for a, b in zip(gt, pred) if a[p] == b[p]) / n for p in range(width)]
    return sum(per_pos) / width


def exact_match(gt: Sequence[Sequence[int]], pred: Sequence[Sequence[int]]) -> float:
    _check_lengths(gt, pred)
    return sum(1 for a, b in zip(gt, pred) if list(a) == list(b)) / len(gt)


@dataclass(frozen=True)
class PredictionRecord:
    gt_concepts: tuple[int, ...]
    pred_concepts: tuple[int, ...]
    gt_label: tuple[int, ...]
    pred_label: tuple[int, ...]


_FIELDS = ("gt_concepts", "pred_concepts", "gt_label", "pred_label")


def _int_vector(v, field: str, line: int) -> tuple[int, ...]:
    if isinstance(v, (bool, int)):
        v = [v]
    if not isinstance(v, list) or not all(isinstance(x, (bool, int)) for x in v):
        raise ParseError(f"{field} must be a list of integers", line)
    return tuple(int(x) for x in v)


def read_predictions(lines: Iterable[str]) -> list[PredictionRecord]:
    out = []
    for n, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", n) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", n)
        missing = [f for f in _FIELDS if f not in obj]
        if missing:
            raise ParseError(f"missing field {missing[0]}", n)
        rec = PredictionRecord(*(_int_vector(obj[f], f, n) for f in _FIELDS))
        if len(rec.gt_concepts) != len(rec.pred_concepts):
            raise ParseError("gt_concepts and pred_concepts differ in length", n)
        if len(rec.gt_label) != len(rec.pred_label):
            raise ParseError("gt_label and pred_label differ in length", n)
        if out and (len(rec.gt_concepts), len(rec.gt_label)) != (len(out[0].gt_concepts), len(out[0].gt_label)):
            raise ParseError("record width differs from the first record", n)
        out.append(rec)
    if not out:
        raise ParseError("no records", 0)
    return out


@dataclass(frozen=True)
class MetricReport:
    collapse: float
    macro_f1: float
    mean_f1: float
    label_accuracy: float
    concept_accuracy: float
    n_samples: int
    n_codes: int

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = ("collapse", "macro_f1", "mean_f1", "label_accuracy", "concept_accuracy")


def evaluate_records(records: Sequence[PredictionRecord], b: int | None = None) -> MetricReport:
    """All metrics for one prediction file.

    Concept codes use base ``b`` (inferred from the largest value when not
    given). ``macro_f1`` is over concept codes; ``mean_f1`` over label
    positions.
    """
    gc = [r.gt_concepts for r in records]
    pc = [r.pred_concepts for r in records]
    if b is None:
        b = max(2, 1 + max(max(v, default=0) for v in gc + pc))
    space = ConceptSpace(len(gc[0]), b)
    cm = confusion_matrix(gc, pc, space)
    g_codes = encode_codes(gc, space)
    p_codes = encode_codes(pc, space)
    gl = [r.gt_label for r in records]
    pl = [r.pred_label for r in records]
    return MetricReport(
        collapse=collapse(cm),
        macro_f1=macro_f1(g_codes, p_codes, cm.labels),
        mean_f1=mean_f1(gl, pl),
        label_accuracy=accuracy(gl, pl),
        concept_accuracy=accuracy(gc, pc),
        n_samples=len(records),
        n_codes=cm.m,
    )
