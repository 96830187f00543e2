"""Exception hierarchy shared by every module of the toolkit."""


class RDLimitError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(RDLimitError, ValueError):
    """An argument is non-finite, out of range or inconsistent."""


class InfiniteRateError(RDLimitError, ValueError):
    """Zero distortion was requested for a source with positive variance."""


class ConvergenceError(RDLimitError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The final residual is kept on ``residual`` so callers can decide whether
    the partial answer is usable.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EstimationError(RDLimitError, RuntimeError):
    """A Monte Carlo estimate could not be formed (degenerate moments)."""


class NumericalError(RDLimitError, ArithmeticError):
    """Non-finite values appeared inside a computation.

    ``stage`` names the step that produced them.
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class InternalConsistencyError(RDLimitError, AssertionError):
    """A quantity that is positive by construction came out non-positive."""


class PGMParseError(RDLimitError, ValueError):
    """Malformed or unsupported PGM input; ``offset`` is the failing byte."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
