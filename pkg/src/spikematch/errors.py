"""Exception types shared across the package."""


class SpikeMatchError(Exception):
    """Base class for all package errors."""


class FormatError(SpikeMatchError):
    """Malformed binary input (truncated record, bad magic, ...)."""


class OrderingError(SpikeMatchError):
    """Event timestamps regress beyond the configured tolerance."""


class GeometryError(SpikeMatchError):
    """Coordinates or shapes fall outside the allowed geometry."""


class EncodeError(SpikeMatchError):
    """A value cannot be represented in the target binary format."""


class ConfigError(SpikeMatchError):
    """Invalid or inconsistent configuration."""


class CheckpointError(SpikeMatchError):
    """Weight checkpoint is unreadable or does not match the network."""
