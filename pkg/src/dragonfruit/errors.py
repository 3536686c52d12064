"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor shape or extent mismatch."""


class ConfigError(ValueError):
    """Invalid configuration value."""


class StateError(RuntimeError):
    """Operation invoked without the prior state it needs (e.g. a forward cache)."""


class IngestionError(RuntimeError):
    """Dataset directory missing, malformed, or empty."""


class DecodeError(IngestionError):
    """Image bytes could not be decoded."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


class ModelFormatError(RuntimeError):
    """Model container could not be read."""


class BadMagicError(ModelFormatError):
    """File does not start with the container magic."""


class VersionError(ModelFormatError):
    """Container format version is not supported."""


class ChecksumError(ModelFormatError):
    """Payload checksum mismatch."""


class TruncatedFileError(ModelFormatError):
    """File is shorter (or longer) than its header declares."""
