"""Exception taxonomy: one base class, one subclass per failure domain."""


class KgencoderError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(KgencoderError):
    """Malformed description corpus or triplet file."""


class CheckpointError(KgencoderError):
    """Unreadable or internally inconsistent encoder checkpoint."""
