"""Exception hierarchy shared by every fkmat module."""


class FkmatError(Exception):
    """Base class for all errors raised by fkmat."""


class ValidationError(FkmatError, ValueError):
    """Malformed input: wrong shape, non-finite entries, broken structure."""


class DomainError(FkmatError, ValueError):
    """Input outside the mathematical domain of an operation."""


class FieldError(FkmatError):
    """A field evaluator produced a value violating the field contract."""


class SampleError(FieldError):
    """A potential evaluated to a non-finite value under the ``reject`` policy.

    ``index`` is the offending batch position when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnsupportedOperationError(FkmatError):
    """The requested operation is not available for this object."""


class NumericError(FkmatError, ArithmeticError):
    """Numerical breakdown (overflow, singular factor, failed decomposition).

    ``step`` and ``path`` locate the failure when it happened inside a transport.
    """

    def __init__(self, message, step=None, path=None):
        super().__init__(message)
        self.step = step
        self.path = path


class DiagnosticError(FkmatError):
    """A diagnostic could not produce an estimate (e.g. every path rejected)."""


class SizeError(FkmatError):
    """A dense problem exceeds the configured size cap."""


class ConfigError(FkmatError):
    """Invalid run configuration."""
