"""Shared exception types."""


class ConfigError(ValueError):
    """Malformed or contradictory experiment configuration."""


class InconsistencyError(RuntimeError):
    """Oracle answers contradict the model assumptions.

    Raised when a search or decode step derives something impossible, e.g. a
    blocked test whose disabled set is empty, or a residual recovery pass that
    makes no progress on a set the oracle keeps reporting as contaminated.
    """


class NumericalError(RuntimeError):
    """A likelihood computation left the finite domain."""

    def __init__(self, message: str, record_index: int | None = None):
        super().__init__(message)
        self.record_index = record_index


class TransportError(RuntimeError):
    """Connection-level failure talking to a remote oracle. Retriable."""


class ProtocolError(RuntimeError):
    """The remote oracle sent a frame we cannot accept. Not retriable."""
