"""Exception hierarchy shared across the pipeline.

The CLI maps each family onto a distinct exit code, so new errors should
subclass one of the four roots below rather than ``Exception`` directly.
"""


class EapredError(Exception):
    """Root of every error raised deliberately by this package."""

    exit_code = 1


class InputError(EapredError):
    """Malformed or missing input data."""

    exit_code = 3


class ConfigError(EapredError):
    """Invalid configuration or hyperparameter."""

    exit_code = 4


class NumericalError(EapredError):
    """Non-finite values or an invalid numerical domain."""

    exit_code = 5


class ComparabilityError(EapredError):
    """Two artifacts that must match (split, config, checkpoint) do not."""

    exit_code = 6


class DimensionError(NumericalError, ValueError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class ProbeError(NumericalError):
    pass


class ValidationError(InputError):
    pass


class MalformedRowError(InputError):
    def __init__(self, path, line, column, message):
        self.path = str(path)
        self.line = line
        self.column = column
        super().__init__(f"{self.path}:{line}: column {column!r}: {message}")


class LeadingGapError(InputError):
    pass


class SizingError(InputError):
    pass


class UnresolvableEventError(InputError):
    pass


class SentimentLookupError(InputError):
    pass


class TransportError(EapredError):
    exit_code = 3

    def __init__(self, message, attempts=0, last_status=None):
        self.attempts = attempts
        self.last_status = last_status
        super().__init__(f"{message} (attempts={attempts}, last_status={last_status})")


class CheckpointError(ComparabilityError):
    pass


class TrainingAbort(NumericalError):
    def __init__(self, message, batch_ids=(), param_norm=float("nan")):
        self.batch_ids = list(batch_ids)
        self.param_norm = param_norm
        super().__init__(f"{message}; batch ids={self.batch_ids}, parameter norm={param_norm:.6g}")
