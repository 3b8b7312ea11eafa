"""Exception and warning classes used across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class AlignmentError(InvalidInputError):
    """Raised when two series or tables cannot be aligned on their timestamps."""


class DegenerateInputError(InvalidInputError):
    """Raised when an input has no usable variation (zero variance, zero moment)."""


class ArbitrageError(InvalidInputError):
    """Raised when an option price lies outside its no-arbitrage bounds."""


class SchemaError(InvalidInputError):
    """Raised when a file does not match its documented schema.

    The offending line number (1-based, header is line 1) is kept in ``line``
    when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateComponentWarning(UserWarning):
    """A component allocation fell back to a reduced formula."""


class IdentifiabilityWarning(UserWarning):
    """More than one recovered component is indistinguishable from Gaussian."""


class SmallSampleWarning(UserWarning):
    """The sample is too short for the requested tail probability."""
