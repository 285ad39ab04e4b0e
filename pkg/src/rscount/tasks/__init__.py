"""Task families, configuration and dataset generation."""

from .builtin import BuiltinTask, Equation, Family, TaskSpec, builtin_task, parse_task_name
from .config import TaskConfig, load_config, parse_config
from .generate import Dataset, DatasetRecord, export_knowledge_dimacs, generate_dataset

# alias used throughout the docs
TaskFamily = Family

__all__ = [
    "BuiltinTask",
    "Dataset",
    "DatasetRecord",
    "Equation",
    "Family",
    "TaskConfig",
    "TaskFamily",
    "TaskSpec",
    "builtin_task",
    "export_knowledge_dimacs",
    "generate_dataset",
    "load_config",
    "parse_config",
    "parse_task_name",
]
