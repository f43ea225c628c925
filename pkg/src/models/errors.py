class SchError(Exception):
    """Base class for codec errors. Each subclass maps to a distinct CLI exit code."""

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(SchError, ValueError):
    """Invalid or unknown configuration."""

    exit_code = 2


class InputError(SchError):
    """Missing path or unsupported image."""

    exit_code = 3


class IncompatibleModelError(SchError):
    """Bitstream or checkpoint produced by a model with a different architecture."""

    exit_code = 4


class BitstreamError(SchError):
    """Malformed, truncated or inconsistent bitstream."""

    exit_code = 5


class MetricError(SchError):
    """RD measurement that cannot be evaluated."""

    exit_code = 6


class DimensionError(SchError, ValueError):
    """Tensor shape violates a precondition."""

    exit_code = 7


class SequencingError(SchError):
    """Slice prediction requested out of autoregressive order."""

    exit_code = 8
