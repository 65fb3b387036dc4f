"""Exception types shared across the package."""


class RcmError(Exception):
    """Base class for all rcmctl errors."""


class InsertionTooShallow(RcmError):
    """Instrument tip is at or behind the trocar point (shaft too short to pivot)."""


class CommandLimitExceeded(RcmError):
    """Commanded rates exceed the configured speed or angular-rate limits."""


class DurationCapReached(RcmError):
    """Profiler duration extension hit its iteration cap without satisfying limits."""


class EmptyEpisode(RcmError):
    """Episode or sample series contains no data."""


class RateTooLow(RcmError):
    """Input sample rate is below the requested resampling rate."""


class SeriesTooShort(RcmError):
    """Series has too few samples for the requested metric."""


class AllZeroSignal(RcmError):
    """Speed signal is identically zero; spectral normalization is undefined."""


class ZeroPeakSpeed(RcmError):
    """Peak speed is zero; jerk normalization is undefined."""


class SchemaMismatch(RcmError):
    """Episode file does not carry the expected schema version or column set."""


class NonMonotoneTime(RcmError):
    """Episode time column is not strictly increasing."""


class MalformedRow(RcmError):
    """A data row failed to parse or violated a row-level invariant."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class ModeSwitchWhileMoving(RcmError):
    """Control mode switches are only allowed while commanded motion is zero."""


class ScriptError(RcmError):
    """Command script failed to parse or violated script invariants."""


class ConfigError(RcmError):
    """Configuration file failed to parse or validate."""
