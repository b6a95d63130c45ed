"""Exception types shared across the package."""


class PrefbenchError(Exception):
    """Base class for all package errors."""


class ValidationError(PrefbenchError, ValueError):
    """Invalid input data: a domain invariant or file schema was violated."""


class DegenerateDataError(ValidationError):
    """Data carries no usable information for the requested computation."""


class TemplateError(PrefbenchError):
    """Prompt template and its fill arguments do not match."""


class ConfigError(PrefbenchError, ValueError):
    """Missing or inconsistent run configuration."""


class BackendError(PrefbenchError):
    """A chat backend failed after exhausting its retry policy."""


class SessionError(PrefbenchError):
    """A harness session aborted; carries the partial transcript."""

    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript
