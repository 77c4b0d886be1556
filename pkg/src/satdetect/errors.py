"""Exception hierarchy shared across the package."""


class SatDetectError(Exception):
    """Base class for all package errors."""


class DecodeError(SatDetectError):
    """Image file could not be read or decoded."""


class ShapeError(SatDetectError):
    """Array dimensions violate a contract (block size, channel count, ...)."""


class CodecError(SatDetectError):
    """JPEG encode/decode round trip failed."""


class IoError(SatDetectError):
    """Filesystem read/write failure."""


class InsufficientData(SatDetectError):
    """Too few samples to fit (fewer patches than the patch dimension)."""


class DegenerateInputWarning(UserWarning):
    """Rank-deficient statistics: some filter channels carry zero energy."""


class SingleClassError(SatDetectError):
    """Both classes are required but only one is present."""


class ConfigMismatch(SatDetectError):
    """Filter bank and patch configuration disagree."""


class MissingChannel(SatDetectError):
    """Requested channel classifier was not retained in the model."""


class EmptyReport(SatDetectError):
    """Channel selection called with no channel scores."""


class FormatVersionError(SatDetectError):
    """Model file format version is not supported."""
