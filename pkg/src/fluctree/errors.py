"""Exception types shared across the package."""


class FluctreeError(Exception):
    """Base class for all package errors."""


class PagerProtocolError(FluctreeError):
    """Pager operation used outside the begin/end protocol."""


class TreeCorruptionError(FluctreeError):
    """A structurally impossible node state or unknown node id."""


class InvariantViolationError(FluctreeError):
    """A runtime-checked algorithm invariant failed; signals a bug."""


class ConfigError(FluctreeError):
    """Invalid configuration value or malformed config file."""


class KeySpaceExhaustedError(FluctreeError):
    """A workload generator ran out of fresh keys in the required range."""


class KeyFileFormatError(FluctreeError):
    """A replay key file could not be parsed.

    Carries the 1-based line number (text format) or byte offset
    (binary format) of the first bad record.
    """

    def __init__(self, message, *, line=None, offset=None):
        super().__init__(message)
        self.line = line
        self.offset = offset
