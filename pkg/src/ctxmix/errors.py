"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so callers that only
care about bad input can catch that; numerical breakdowns derive from
:class:`ArithmeticError`.
"""


class CtxMixError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CtxMixError, ValueError):
    pass


class NumericalError(CtxMixError, ArithmeticError):
    pass


# distributions / corpora
class NonPositiveEntry(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class CorpusTooShort(ValidationError):
    pass


class AlphabetOverflow(ValidationError):
    pass


class UnknownSymbol(ValidationError, KeyError):
    pass


class SpaceMismatch(ValidationError):
    pass


# mixing
class LinearWeightConstraintViolated(ValidationError):
    pass


class ContextOutOfRange(ValidationError, IndexError):
    pass


# grids / simulation
class IndexOutOfRange(ValidationError, IndexError):
    pass


class InvalidGrid(ValidationError):
    pass


class GridTooLarge(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class Overflow(NumericalError, OverflowError):
    pass


class StepTooLarge(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass
