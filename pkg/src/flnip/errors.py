"""Exception types raised across the package."""


class FlnipError(ValueError):
    """Base class for all recoverable input errors."""


# pixelgrid
class MalformedHeader(FlnipError):
    pass


class MaxvalTooLarge(FlnipError):
    pass


class TruncatedPayload(FlnipError):
    pass


class ImageTooSmall(FlnipError):
    pass


class SizeMismatch(FlnipError):
    pass


# gaussian
class NonPositiveSigma(FlnipError):
    pass


# patterns
class IndexOutOfRange(FlnipError):
    pass


class ZeroReference(FlnipError):
    pass


class EmptyMap(FlnipError):
    pass


# metrics
class LengthMismatch(FlnipError):
    pass


class AllZeroWeights(FlnipError):
    pass


# evolver
class TooFewRecords(FlnipError):
    pass


class EmptyCategory(FlnipError):
    pass


class EmptyPopulation(FlnipError):
    pass


# retrieval
class DuplicateId(FlnipError):
    pass


class NOutOfRange(FlnipError):
    pass


class BadMagic(FlnipError):
    pass


class VersionUnsupported(FlnipError):
    pass


class CorruptRecord(FlnipError):
    pass


class ChecksumMismatch(FlnipError):
    pass


# datasets
class EmptyCorpus(FlnipError):
    pass


class UndecodableFile(FlnipError):
    pass
