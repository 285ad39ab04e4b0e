"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RSCountError(Exception):
    """Base class for all library errors."""


class ParseError(RSCountError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EvaluationError(RSCountError):
    pass


class CapacityError(RSCountError):
    """An enumeration or search would exceed a configured bound."""

    def __init__(self, message: str, required: int | None = None, bound: int | None = None):
        self.required = required
        self.bound = bound
        if required is not None and bound is not None:
            message = f"{message} (required {required}, bound {bound})"
        super().__init__(message)


class BudgetExceeded(CapacityError):
    """The model counter hit its decision cap; ``stats`` holds partial statistics."""

    def __init__(self, message: str, stats=None):
        self.stats = stats
        super().__init__(message)


class KnowledgeError(RSCountError):
    pass


class EncodingError(RSCountError):
    pass


class ConfigError(RSCountError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class GenerationError(RSCountError):
    pass
