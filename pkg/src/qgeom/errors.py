"""Exception hierarchy. Every error carries a stable ``code`` used in run manifests."""
from __future__ import annotations


class QGeomError(Exception):
    code = "QGeomError"


class NotHermitian(QGeomError):
    code = "NotHermitian"


class NumericalFailure(QGeomError):
    code = "NumericalFailure"


class DimensionMismatch(QGeomError):
    code = "DimensionMismatch"


class DimensionTooLarge(QGeomError):
    code = "DimensionTooLarge"


class NotNormalized(QGeomError):
    code = "NotNormalized"


class DegenerateGroundState(QGeomError):
    code = "DegenerateGroundState"


class ZeroOverlap(QGeomError):
    code = "ZeroOverlap"


class InvalidParameter(QGeomError, ValueError):
    code = "InvalidParameter"


class ForbiddenOperator(QGeomError):
    code = "ForbiddenOperator"


class UndefinedUnderPBC(QGeomError):
    code = "UndefinedUnderPBC"


class StepTooLarge(QGeomError):
    code = "StepTooLarge"


class FitFailure(QGeomError):
    code = "FitFailure"


class BasisNotConverged(QGeomError):
    code = "BasisNotConverged"


class ConfigParseError(QGeomError):
    """Scenario document error; ``line`` (1-based, when known) and ``field`` (dotted path) locate it."""

    code = "ConfigParseError"

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if field:
            where.append(f"field {field}")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class UnknownTask(QGeomError):
    code = "UnknownTask"


class ToleranceExceeded(QGeomError):
    """A runner task computed its result but a declared consistency check failed."""

    code = "ToleranceExceeded"
