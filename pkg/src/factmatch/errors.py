class FactMatchError(Exception):
    """Base class for data-level failures (CLI exit code 2)."""


class FormatError(FactMatchError):
    pass


class ParseError(FactMatchError):
    pass


class EmptySplit(FactMatchError):
    pass


class EmptyInput(FactMatchError):
    pass


class EmptyIndex(FactMatchError):
    pass


class UnknownDoc(FactMatchError, KeyError):
    pass


class UnknownQuery(FactMatchError, KeyError):
    pass


class MissingScorer(FactMatchError):
    pass


class DegenerateData(FactMatchError):
    pass


class LayoutMismatch(FactMatchError):
    pass


class NumericalError(ArithmeticError):
    """Non-finite loss or parameters (CLI exit code 3)."""
