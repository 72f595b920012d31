"""Exception hierarchy for dreammpc.

Each exception carries an ``ErrorType`` so callers (the CLI in particular) can map
failures onto exit codes without string matching.
"""

from dreammpc.model.models import ErrorType


class DreamMPCError(Exception):
    """Base class for all dreammpc errors."""

    error_type: ErrorType = ErrorType.INTERNAL_ERROR

    def __init__(self, message: str, error_type: ErrorType | None = None):
        super().__init__(message)
        if error_type is not None:
            self.error_type = error_type


class ConfigError(DreamMPCError):
    """Invalid or unreadable run configuration."""

    error_type = ErrorType.CONFIG_ERROR


class DimensionMismatchError(DreamMPCError, ValueError):
    """Array shapes do not match what an operation expects."""

    error_type = ErrorType.DIMENSION_MISMATCH


class NonFiniteError(DreamMPCError, ValueError):
    """An input or intermediate value is NaN or infinite."""

    error_type = ErrorType.NON_FINITE


class TapeConsumedError(DreamMPCError, RuntimeError):
    """A gradient tape was replayed a second time."""

    error_type = ErrorType.TAPE_CONSUMED


class CheckpointFormatError(DreamMPCError):
    """A checkpoint file is truncated, corrupted or of an unknown version."""

    error_type = ErrorType.CHECKPOINT_ERROR


class NumericalAbortError(DreamMPCError):
    """Training hit too many consecutive non-finite losses."""

    error_type = ErrorType.NUMERICAL_ABORT


class RunDirectoryConflictError(DreamMPCError):
    """Refusing to write into a completed run directory."""

    error_type = ErrorType.RUN_DIR_CONFLICT
