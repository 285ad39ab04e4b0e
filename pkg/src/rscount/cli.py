"""Command-line interface. Every command prints one JSON object on stdout.

Exit codes: 0 success, 1 usage or validation error, 2 capacity or budget
exceeded, 3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from typing import Sequence

from .alphamap import DEFAULT_ALPHA_CAP, StructureMode, count_by_enumeration, count_closed_form, rs_affected
from .counter import CounterConfig, count_models
from .encode import build_counting_cnf, export_problem
from .errors import CapacityError, RSCountError
from .formula import parse_dimacs
from .knowledge import Knowledge, Support
from .metrics import METRIC_NAMES, evaluate_records, read_predictions
from .tasks.builtin import Family, TaskSpec, builtin_task, parse_task_name
from .tasks.config import load_config
from .tasks.generate import dataset_to_json, export_knowledge_dimacs, generate_dataset, manifest

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3

METHODS = ("enumerate", "encode-count", "closed-form", "models")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# inputs


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def load_task(args) -> tuple[Knowledge, Support]:
    if (args.task is None) == (args.cnf is None):
        raise UsageError("give exactly one of --task or --cnf")
    if args.cnf is not None:
        cnf = parse_dimacs(_read(args.cnf))
        task = builtin_task(TaskSpec(Family.CUSTOM_CNF, {"cnf": cnf}))
    else:
        task = builtin_task(parse_task_name(args.task))
    return task.knowledge, parse_support(args.support, task.knowledge, task.support)


def _parse_vector(text: str, k: int) -> tuple[int, ...]:
    text = text.strip()
    if "," in text:
        vals = [int(t) for t in text.split(",")]
    else:
        vals = [int(ch) for ch in text]
    if len(vals) != k:
        raise UsageError(f"support vector {text!r} has {len(vals)} values, expected {k}")
    return tuple(vals)


def parse_support(spec: str | None, K: Knowledge, default: Support) -> Support:
    """``exhaustive``, ``default``, a file with one vector per line, or
    inline vectors separated by ``;`` (``0,1,1;110``)."""
    if spec is None or spec == "default":
        return default
    if spec == "exhaustive":
        return Support.exhaustive(K)
    if os.path.exists(spec):
        text = _read(spec)
        if text.lstrip().startswith("["):
            vectors = [tuple(int(x) for x in v) for v in json.loads(text)]
        else:
            lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
            vectors = [_parse_vector(ln, K.space.k) for ln in lines]
    else:
        try:
            vectors = [_parse_vector(part, K.space.k) for part in spec.split(";") if part.strip()]
        except ValueError:
            raise UsageError(f"support {spec!r} is neither a keyword, a file nor inline vectors") from None
    if not vectors:
        raise UsageError("support is empty")
    for v in vectors:
        if not K.space.contains(v):
            raise UsageError(f"support vector {list(v)} is outside the concept space")
    return Support(K, vectors)


# ---------------------------------------------------------------------------
# commands


def _mode(args) -> StructureMode:
    return StructureMode(args.mode)


def run_count(args) -> dict:
    if args.method == "models":
        if args.cnf is None or args.task is not None:
            raise UsageError("--method models counts a DIMACS file given with --cnf")
        cnf = parse_dimacs(_read(args.cnf))
        res = count_models(cnf, CounterConfig(max_decisions=args.budget))
        return {
            "count": str(res.value),
            "method": "models",
            "num_variables": cnf.num_variables,
            "num_clauses": len(cnf.clauses),
            "stats": res.stats.as_dict(),
            "wall_time_ms": round(res.stats.wall_time * 1000, 3),
        }
    K, supp = load_task(args)
    mode = _mode(args)
    method = args.method or ("closed-form" if mode is StructureMode.UNRESTRICTED else "encode-count")
    if method == "closed-form" and mode is not StructureMode.UNRESTRICTED:
        raise UsageError("closed-form counts need --mode unrestricted")
    if method == "encode-count" and mode is StructureMode.UNRESTRICTED:
        raise UsageError("encode-count needs --mode complete or permutation")
    t0 = time.perf_counter()
    extra: dict = {}
    if method == "enumerate":
        value = count_by_enumeration(K, supp, mode, cap=args.cap)
    elif method == "closed-form":
        value = count_closed_form(K, supp)
    else:
        problem = build_counting_cnf(K, supp, mode)
        res = count_models(problem.cnf, CounterConfig(max_decisions=args.budget))
        value = res.value
        extra = {"num_variables": problem.cnf.num_variables, "stats": res.stats.as_dict()}
    return {
        "count": str(value),
        "rs_affected": rs_affected(value),
        "method": method,
        "mode": mode.value,
        "k": K.space.k,
        "b": K.space.b,
        "support_size": len(supp),
        "wall_time_ms": round((time.perf_counter() - t0) * 1000, 3),
        **extra,
    }


def _write(path: str, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_encode(args) -> dict:
    if args.out is None:
        raise UsageError("encode needs --out")
    K, supp = load_task(args)
    problem = build_counting_cnf(K, supp, _mode(args))
    text = export_problem(problem)
    _write(args.out, text)
    return {
        "out": args.out,
        "mode": problem.mode.value,
        "k": K.space.k,
        "b": K.space.b,
        "support_size": problem.support_size,
        "num_variables": problem.cnf.num_variables,
        "num_clauses": len(problem.cnf.clauses),
        "ranges": problem.book.ranges(),
        "sha256": hashlib.sha256(text.encode()).hexdigest(),
    }


def run_gen(args) -> dict:
    if args.config is None or args.out is None:
        raise UsageError("gen needs --config and --out")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    ds = generate_dataset(cfg)
    data_text = dataset_to_json(ds)
    kb_text = export_knowledge_dimacs(ds.knowledge)
    man = manifest(cfg, ds, data_text, kb_text)
    man_text = json.dumps(man, sort_keys=True, indent=2) + "\n"
    os.makedirs(args.out, exist_ok=True)
    paths = {
        "dataset": os.path.join(args.out, "dataset.json"),
        "knowledge": os.path.join(args.out, "knowledge.cnf"),
        "manifest": os.path.join(args.out, "manifest.json"),
    }
    _write(paths["dataset"], data_text)
    _write(paths["knowledge"], kb_text)
    _write(paths["manifest"], man_text)
    return {**man, "files": paths, "manifest_sha256": hashlib.sha256(man_text.encode()).hexdigest()}


def run_eval(args) -> dict:
    with open(args.predictions, encoding="utf-8") as fh:
        records = read_predictions(fh)
    report = evaluate_records(records, args.b).as_dict()
    if args.metrics:
        wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
        unknown = [m for m in wanted if m not in METRIC_NAMES]
        if unknown:
            raise UsageError(f"unknown metric {unknown[0]!r}; choose from {', '.join(METRIC_NAMES)}")
        report = {m: report[m] for m in wanted} | {"n_samples": report["n_samples"]}
    return report


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rscount", description="Count reasoning shortcuts and build symbolic tasks.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def task_args(sp):
        sp.add_argument("--task", help="builtin task, e.g. xor-3, and-3, lcnf-3-2-2-7, mnadd:digits=2,b=4")
        sp.add_argument("--cnf", help="DIMACS file; as knowledge it means y <-> formula")
        sp.add_argument("--support", default=None, help="exhaustive | default | FILE | inline '011;110'")
        sp.add_argument("--mode", default="permutation", choices=[m.value for m in StructureMode])

    c = sub.add_parser("count", help="count reasoning shortcuts (or raw models of --cnf)")
    task_args(c)
    c.add_argument("--method", choices=METHODS)
    c.add_argument("--cap", type=int, default=DEFAULT_ALPHA_CAP, help="enumeration cap on the map space")
    c.add_argument("--budget", type=int, default=None, help="decision budget for the model counter")
    c.add_argument("--seed", type=int, default=None, help="accepted for symmetry; counting is deterministic")

    e = sub.add_parser("encode", help="write the counting CNF")
    task_args(e)
    e.add_argument("--out")

    g = sub.add_parser("gen", help="generate a dataset from a YAML config")
    g.add_argument("--config")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int, default=None, help="override the config seed")

    v = sub.add_parser("eval", help="metrics for a JSONL prediction file")
    v.add_argument("predictions")
    v.add_argument("--metrics", help="comma-separated subset of " + ", ".join(METRIC_NAMES))
    v.add_argument("--b", type=int, default=None, help="values per concept (default: inferred)")
    return p


COMMANDS = {"count": run_count, "encode": run_encode, "gen": run_gen, "eval": run_eval}


def _error(kind: str, err: BaseException, **extra) -> dict:
    return {"error": kind, "message": str(err), **extra}


def run(argv: Sequence[str] | None = None) -> tuple[int, dict]:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command (count, encode, gen, eval)")
        return EXIT_OK, COMMANDS[args.command](args)
    except UsageError as e:
        return EXIT_USAGE, _error("usage", e)
    except CapacityError as e:
        extra = {"required": e.required, "bound": e.bound}
        stats = getattr(e, "stats", None)
        if stats is not None:
            extra["stats"] = stats.as_dict()
        return EXIT_CAPACITY, _error(type(e).__name__, e, **extra)
    except RSCountError as e:
        extra = {"path": e.path} if hasattr(e, "path") else {}
        return EXIT_USAGE, _error(type(e).__name__, e, **extra)
    except OSError as e:
        return EXIT_IO, _error("io", e)
    except ValueError as e:
        return EXIT_USAGE, _error("invalid", e)


def main(argv: Sequence[str] | None = None) -> int:
    code, report = run(argv)
    json.dump(report, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
