"""Exception types shared across the package."""


class ReplayError(Exception):
    """Base class for all errors raised by distreplay."""


class RejectedInputError(ReplayError, ValueError):
    """Input has the wrong shape or contains non-finite values."""


class InvalidSlotError(ReplayError, KeyError):
    """A slot id does not refer to a stored transition."""


class IndexCorruptionError(ReplayError):
    """The cluster index disagrees with itself or with the buffer."""


class NotReadyError(ReplayError):
    """Sampling was requested from an empty buffer."""


class ConfigError(ReplayError, ValueError):
    """A configuration value is missing, malformed or out of range."""


class NumericFaultError(ReplayError, FloatingPointError):
    """A value update produced a non-finite number."""


class AlignmentError(ReplayError, ValueError):
    """Metric series that must line up episode-by-episode do not."""
