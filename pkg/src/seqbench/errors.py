"""Exception hierarchy shared across the package."""


class SeqbenchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SeqbenchError):
    """A sequence does not conform to the problem's alphabet/length."""


class LengthMismatch(ValidationError):
    pass


class UnknownToken(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    """An array has the wrong shape for the requested operation."""


class BudgetExhausted(SeqbenchError):
    """An evaluation batch would exceed the remaining budget."""


class UnknownProblem(SeqbenchError):
    pass


class UnknownSolver(SeqbenchError):
    pass


class InfeasibleConfig(SeqbenchError):
    """Problem parameters admit no valid instance (e.g. motif wider than its window)."""


class InstanceTooLarge(SeqbenchError):
    """Exhaustive enumeration was requested beyond the configured bound."""


class NumericalError(SeqbenchError):
    """A linear-algebra operation failed beyond recoverable jitter."""


class SearchSpaceExhausted(SeqbenchError):
    """Every sequence of the search space has already been evaluated."""


class ConfigError(SeqbenchError):
    """An experiment configuration is malformed or has unknown keys."""


class IoError(SeqbenchError):
    """Observer sink could not be written."""


class ProtocolError(SeqbenchError):
    """A wire frame violates the message protocol."""


class PayloadTooLarge(ProtocolError):
    pass


class ConnectionClosed(SeqbenchError):
    """The peer closed the connection mid-frame or at a frame boundary."""


class RemoteError(SeqbenchError):
    """The server answered an error frame."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
