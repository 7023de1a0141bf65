"""Exception hierarchy shared across the toolkit.

The three base classes partition failures for the CLI exit codes:
file/format problems (1), input validation (2), numerical issues (3).
"""


class OpensetError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class FormatError(OpensetError):
    """Malformed or unreadable activation file."""

    exit_code = 1


class ValidationError(OpensetError):
    """Inputs violate a documented precondition."""

    exit_code = 2


class NumericalError(OpensetError):
    """Data is structurally valid but numerically unusable."""

    exit_code = 3


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class LabelOutOfRange(FormatError):
    pass


class NonFiniteValue(FormatError):
    pass


class DimensionMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class InvalidSplit(ValidationError):
    pass


class UnknownLabel(ValidationError):
    pass


class InsufficientData(NumericalError):
    pass


class DegenerateData(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SingleClass(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass
