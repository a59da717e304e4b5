"""Exception hierarchy.

Two branches matter to callers: ValidationError for bad inputs that can be
checked before any numerics run, and NumericalError for failures discovered
during a computation. The CLI maps them to exit codes 2 and 3.
"""


class CmtError(Exception):
    """Base class for all library errors."""


class ValidationError(CmtError):
    """Input rejected before computation started."""


class NumericalError(CmtError):
    """Computation started but could not be completed."""


class InvalidDateOrder(ValidationError):
    pass


class InvalidInterval(ValidationError):
    pass


class InvalidTenor(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class InsufficientSamples(ValidationError):
    pass


class ExtrapolationNotAllowed(NumericalError):
    pass


class NegativeHazardImplied(NumericalError):
    pass


class StrippingFailed(NumericalError):
    pass


class InversionRangeError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class DegenerateCurve(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class DegenerateBond(NumericalError):
    pass


class DegenerateYield(NumericalError):
    pass


class NoArbitrageViolation(NumericalError):
    pass
