"""Exception types shared across the package."""


class SignDataError(ValueError):
    """Input data is malformed or violates a data invariant."""


class ParseError(SignDataError):
    """A record could not be parsed.

    ``line`` is the 1-based line number in the source file, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataValidationError(SignDataError):
    """Parsed data violates a type or dataset invariant."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (singular covariance, non-monotone EM, ...)."""


class ModelFormatError(ValueError):
    """A serialized model cannot be read (truncated, wrong version, ...)."""
