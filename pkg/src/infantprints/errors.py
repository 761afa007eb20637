"""Exception hierarchy shared across the package."""


class IpxError(Exception):
    """Base class for all infantprints errors."""


# --- image ingestion / resampling ---

class UnsupportedFormat(IpxError):
    pass


class MissingResolution(IpxError):
    pass


class CorruptData(IpxError):
    pass


class UpsampleRequested(IpxError):
    pass


class MissingAnalysis(IpxError):
    pass


# --- texture embeddings ---

class WrongResolution(IpxError):
    pass


class EmptyForeground(IpxError):
    pass


class DimensionMismatch(IpxError):
    pass


class WrongDimension(IpxError):
    pass


class NonFiniteValue(IpxError):
    pass


class EmptyGallery(IpxError):
    pass


class ExtractorMismatchWarning(UserWarning):
    """Embeddings from different extractors were compared."""


# --- templates and fusion ---

class NoCaptures(IpxError):
    pass


class MixedSubjects(IpxError):
    pass


class ImpressionLimitExceeded(NoCaptures):
    """More impressions supplied for one finger than the role allows."""


class FingerMismatch(IpxError):
    pass


class MissingCalibration(IpxError):
    pass


class BadWeights(IpxError):
    pass


class NoScores(IpxError):
    pass


# --- gallery ---

class DuplicateId(IpxError):
    pass


class PotentialDuplicateFound(IpxError):
    """Raised by dedup-enabled enrollment; carries the candidate list."""

    def __init__(self, message, candidates=None):
        super().__init__(message)
        self.candidates = candidates


class UnknownSubject(IpxError):
    pass


class MissingThresholdTable(IpxError):
    pass


class VersionMismatch(IpxError):
    pass


class ChecksumMismatch(IpxError):
    pass


# --- evaluation ---

class InsufficientImpostors(IpxError):
    pass


class EmptyCohort(IpxError):
    pass
