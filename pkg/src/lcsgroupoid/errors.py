"""Exception hierarchy shared by every module."""

from __future__ import annotations


class GeometryError(Exception):
    """Base class for all errors raised by this package."""


class DefinitionError(GeometryError):
    """Malformed or inconsistent user input (DSL files, charts, maps)."""


class ParseError(DefinitionError):
    """Syntax error in an expression or definition file, with a position."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownVariable(DefinitionError):
    def __init__(self, name: str, chart: str | None = None):
        where = f" on chart {chart!r}" if chart else ""
        super().__init__(f"unknown variable {name!r}{where}")
        self.name = name


class UnknownSuite(DefinitionError):
    pass


class ChartMismatch(GeometryError):
    pass


class KindMismatch(GeometryError):
    pass


class DegreeOverflow(GeometryError):
    pass


class DegreeUnderflow(GeometryError):
    pass


class DomainError(GeometryError):
    """Evaluation left the real domain of an operator (log, sqrt, division)."""

    def __init__(self, message: str, point=None):
        if point is not None:
            message = f"{message} at {point}"
        super().__init__(message)
        self.point = point


class SamplingExhausted(GeometryError):
    pass


class WitnessError(GeometryError):
    """An error that carries the sample point where it was detected."""

    def __init__(self, message: str, witness=None):
        if witness is not None:
            message = f"{message} (witness {witness})"
        super().__init__(message)
        self.witness = witness


class SingularForm(WitnessError):
    pass


class NotContact(WitnessError):
    pass


class NotProjectable(WitnessError):
    pass


class NotComposable(WitnessError):
    pass


class RankDeficiency(WitnessError):
    pass


class NotInFiber(WitnessError):
    pass


class BasicnessViolation(WitnessError):
    pass
