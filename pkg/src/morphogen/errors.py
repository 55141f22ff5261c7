"""Exception types shared across the package."""


class MorphogenError(Exception):
    """Base class for all package errors."""


class RejectedInput(MorphogenError, ValueError):
    """An operation received arguments that violate its preconditions."""


class ConfigError(MorphogenError, ValueError):
    """A hyperparameter or experiment configuration is invalid."""


class ParseError(MorphogenError, ValueError):
    """Malformed input text; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(MorphogenError):
    """A serialized model could not be loaded or is inconsistent."""


class DegenerateModelWarning(UserWarning):
    """A generative model keeps producing empty samples."""
