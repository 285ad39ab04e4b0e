"""Symbolic dataset generation and knowledge export."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
import numpy as np

from ..encode import exactly_one
from ..errors import ConfigError, EncodingError, GenerationError
from ..formula import CnfFormula, emit_dimacs, tseitin
from ..knowledge import ConceptSpace, Knowledge, label_bit_width
from ..rng import SplitMix64
from .config import TaskConfig, in_distribution_pool

SPLITS = ("train", "val", "test", "ood")


@dataclass(frozen=True)
class DatasetRecord:
    concepts: tuple[int, ...]
    label: tuple[int, ...]
    split: str

    def as_dict(self) -> dict:
        return {"concepts": list(self.concepts), "label": list(self.label), "split": self.split}


@dataclass(frozen=True)
class Dataset:
    space: ConceptSpace
    knowledge: Knowledge
    records: tuple[DatasetRecord, ...]
    seed: int

    def split_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in SPLITS}
        for r in self.records:
            counts[r.split] += 1
        return counts

    def split(self, name: str) -> list[DatasetRecord]:
        return [r for r in self.records if r.split == name]


def split_sizes(cfg: TaskConfig) -> dict[str, int]:
    n_in = round(cfg.n_samples * cfg.prop_in_distribution)
    n_val = round(n_in * cfg.val_prop)
    n_test = round(n_in * cfg.test_prop)
    return {
        "train": n_in - n_val - n_test,
        "val": n_val,
        "test": n_test,
        "ood": cfg.n_samples - n_in,
    }


def _label_keys(K: Knowledge, labels: np.ndarray) -> np.ndarray:
    """One integer per label row, ordered like the label tuples."""
    keys = np.zeros(len(labels), dtype=np.int64)
    for p, dom in enumerate(K.label_domains):
        lo, hi = min(dom), max(dom)
        keys = keys * (hi - lo + 1) + (labels[:, p] - lo)
    return keys


def _groups(K: Knowledge, codes: np.ndarray) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """Pool codes grouped by label, groups sorted by label."""
    labels = K.labels_batch(codes)
    keys = _label_keys(K, labels)
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    out = []
    for g in range(len(uniq)):
        label = tuple(int(v) for v in labels[first[g]])
        out.append((label, codes[order[bounds[g] : bounds[g + 1]]]))
    return out


def _ood_pool(K: Knowledge, in_codes: np.ndarray) -> np.ndarray:
    rest = K.candidate_codes()
    out = rest[~np.isin(rest, in_codes)]
    # with nothing held out, ood draws from every candidate
    return out if len(out) else rest


def _check_sides(K: Knowledge, groups, where: str) -> None:
    if len(groups) < 2:
        only = groups[0][0] if groups else ()
        raise GenerationError(f"{where} combinations all have label {list(only)}; cannot balance labels")
    boolean = [p for p, d in enumerate(K.label_domains) if tuple(d) == (0, 1)]
    for p in boolean:
        seen = {y[p] for y, _ in groups}
        if len(seen) < 2:
            state = "positive" if 0 in seen else "negative"
            raise GenerationError(f"no {state} {where} combination for label {p}")


def generate_dataset(cfg: TaskConfig) -> Dataset:
    """Sample records with replacement, cycling through label groups.

    For a single boolean label the groups are (false, true), so the draws
    alternate between negative and positive configurations. One cycle
    counter runs across all splits, keeping the overall balance within one.
    """
    task = cfg.task()
    K = task.knowledge
    space = K.space
    sizes = split_sizes(cfg)
    in_codes = np.unique(in_distribution_pool(cfg, task))
    if K.concept_domains is not None:
        digits = space.digits(in_codes)
        for j, dom in enumerate(K.concept_domains):
            bad = ~np.isin(digits[:, j], dom)
            if bad.any():
                c = list(digits[int(np.argmax(bad))])
                raise ConfigError("combinations_in_distribution", f"{c} is outside the concept domains")
    in_groups = _groups(K, in_codes)
    _check_sides(K, in_groups, "in-distribution")
    ood_groups = _groups(K, _ood_pool(K, in_codes)) if sizes["ood"] else None

    rng = SplitMix64(cfg.seed)
    records: list[DatasetRecord] = []
    turn = 0
    for split in SPLITS:
        groups = ood_groups if split == "ood" else in_groups
        for _ in range(sizes[split]):
            label, members = groups[turn % len(groups)]
            turn += 1
            code = int(members[rng.randbelow(len(members))])
            records.append(DatasetRecord(space.decode(code), label, split))
    return Dataset(space, K, tuple(records), cfg.seed)


def dataset_to_json(ds: Dataset) -> str:
    K = ds.knowledge
    doc = {
        "task": K.name,
        "k": ds.space.k,
        "b": ds.space.b,
        "concept_names": list(K.concept_names) if K.concept_names else None,
        "label_names": list(K.label_names) if K.label_names else None,
        "seed": ds.seed,
        "records": [r.as_dict() for r in ds.records],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def export_knowledge_dimacs(K: Knowledge) -> str:
    """CNF whose models, restricted to concept and label bits, are exactly
    the pairs ``(c, beta(c))``.

    Variables: one-hot concept bits first (``j*b + v + 1``), then label bits
    (one per boolean label, one-hot per categorical label), then Tseitin
    auxiliaries.
    """
    if not K.has_formula:
        raise EncodingError("knowledge has no formula form")
    space = K.space
    w = space.width
    n_label = label_bit_width(K.label_domains)
    clauses: list[tuple[int, ...]] = []
    for j in range(space.k):
        clauses.extend(exactly_one([space.bit(j, v) + 1 for v in range(space.b)]))
    nxt = w + n_label + 1
    for i, ind in enumerate(K.indicators):
        y = w + 1 + i
        sub, root, n_aux = tseitin(ind.formula, nxt)
        nxt += n_aux
        clauses.extend(sub.clauses)
        clauses.extend([(-y, root), (y, -root)])
    cnf = CnfFormula(nxt - 1, tuple(clauses))
    comments = [
        f"knowledge {K.name or 'unnamed'} k={space.k} b={space.b}",
        f"vars concepts 1-{w} (bit of concept j value v = j*{space.b} + v + 1)",
        f"vars labels {w + 1}-{w + n_label}",
        f"vars aux {w + n_label + 1}-{nxt - 1}" if nxt - 1 > w + n_label else "vars aux none",
    ]
    for i, ind in enumerate(K.indicators):
        name = K.label_names[ind.position] if K.label_names else f"y{ind.position}"
        comments.append(f"label {w + 1 + i} = [{name} == {ind.value}]")
    if K.concept_names:
        for j, name in enumerate(K.concept_names):
            comments.append(f"concept {j} {name} bits {j * space.b + 1}-{(j + 1) * space.b}")
    return emit_dimacs(cnf, comments)


def manifest(cfg: TaskConfig, ds: Dataset, dataset_text: str, knowledge_text: str | None) -> dict:
    return {
        "task": ds.knowledge.name,
        "seed": cfg.seed,
        "config_sha256": cfg.sha256,
        "dataset_sha256": sha256_text(dataset_text),
        "knowledge_sha256": sha256_text(knowledge_text) if knowledge_text is not None else None,
        "splits": ds.split_counts(),
        "n_records": len(ds.records),
    }
