"""Exception types shared across the package."""


class KgfuseError(Exception):
    """Base class for all package-specific errors."""


class DatasetError(KgfuseError):
    """Malformed or missing dataset files."""


class UnknownEntityError(KgfuseError):
    """Lookup of an entity name or id not present in the vocabulary."""


class EmbeddingFormatError(KgfuseError):
    """Malformed embedding file: bad magic, truncation, or size mismatch."""


class CheckpointError(KgfuseError):
    """Malformed checkpoint file or config mismatch on load."""


class ConfigError(KgfuseError):
    """Invalid configuration value or combination."""
