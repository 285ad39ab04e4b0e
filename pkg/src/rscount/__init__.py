"""Exact counting of reasoning shortcuts for symbolic learning-and-reasoning tasks."""

from .alphamap import (
    AlphaMap,
    StructureMode,
    count_by_enumeration,
    count_closed_form,
    enumerate_alphas,
    is_optimal,
    rs_affected,
)
from .counter import CounterConfig, ModelCount, count_exhaustive, count_models
from .encode import CountingProblem, build_counting_cnf, export_problem
from .errors import (
    BudgetExceeded,
    CapacityError,
    ConfigError,
    EncodingError,
    EvaluationError,
    GenerationError,
    KnowledgeError,
    ParseError,
    RSCountError,
)
from .formula import BoolExpr, CnfFormula, emit_dimacs, parse_dimacs, tseitin
from .knowledge import ConceptSpace, Knowledge, Support, exhaustive_support, label_of

__version__ = "0.1.0"
