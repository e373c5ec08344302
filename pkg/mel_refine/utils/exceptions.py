"""Custom exceptions for the Mel-Refine toolkit."""


class MelRefineError(Exception):
    """Base exception for the Mel-Refine toolkit."""
    pass


class ConfigurationError(MelRefineError):
    """Raised when configuration is invalid or missing."""
    pass


class ValidationError(MelRefineError):
    """Raised when a tensor, parameter or shape fails validation."""
    pass


class NonRealSpectrumError(MelRefineError):
    """Raised when a spectrum that must invert to a real map is not conjugate-symmetric."""
    pass


class FmapFormatError(MelRefineError):
    """Base class for FMAP file decoding failures."""
    pass


class BadMagicError(FmapFormatError):
    """File does not start with the FMAP magic."""
    pass


class UnsupportedVersionError(FmapFormatError):
    """FMAP version field is not understood."""
    pass


class UnsupportedDtypeError(FmapFormatError):
    """FMAP dtype field is not understood."""
    pass


class TruncatedPayloadError(FmapFormatError):
    """Header or payload shorter than the header promises."""
    pass


class DimOverflowError(FmapFormatError):
    """Header dimensions are zero or too large to address."""
    pass


class AudioFormatError(MelRefineError):
    """Raised for unsupported or malformed audio input."""
    pass


class ObjectiveError(MelRefineError):
    """Raised when an objective cannot produce a finite score."""
    pass


class SearchError(MelRefineError):
    """Base class for parameter search failures."""
    pass


class EmptyGridError(SearchError):
    """No grid point survives the ordering constraints."""
    pass


class AllTrialsFailedError(SearchError):
    """Every trial in a sweep failed."""
    pass
