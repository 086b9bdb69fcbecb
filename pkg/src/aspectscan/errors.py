"""Exception hierarchy shared by every stage of the analyzer."""

from __future__ import annotations


class AspectScanError(Exception):
    """Base class for all analyzer errors."""


class FrontendError(AspectScanError):
    pass


class SourceSyntaxError(FrontendError):
    def __init__(self, message: str, line: int | None, col: int | None):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class ProcedureNotFoundError(FrontendError, LookupError):
    pass


class UnsupportedConstructError(FrontendError):
    pass


class ScfgError(AspectScanError):
    pass


class UnknownStateError(ScfgError, LookupError):
    pass


class NotBranchingError(ScfgError):
    pass


class SableSyntaxError(AspectScanError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        where = f" at line {line}" if line is not None else ""
        if line is not None and col is not None:
            where += f", column {col}"
        super().__init__(f"{message}{where}")
        self.line = line
        self.col = col


class SableValidationError(AspectScanError):
    pass


class AnnotationFormatError(AspectScanError):
    pass


class AdviceError(AspectScanError):
    """Failure while executing advice code."""


class AdviceTypeError(AdviceError, TypeError):
    pass


class MergeConflictError(AdviceError, ValueError):
    pass


class CyclicDependencyError(AspectScanError):
    def __init__(self, remaining):
        self.remaining = sorted(remaining)
        super().__init__("cyclic traversal dependencies among: " + ", ".join(self.remaining))


class DivergenceError(AspectScanError):
    pass
