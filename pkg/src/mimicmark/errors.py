"""Exception hierarchy shared by all mimicmark modules."""


class MimicmarkError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedFormatError(MimicmarkError):
    """Image format or encoding parameter outside the supported set."""


class CorruptImageError(MimicmarkError):
    """File exists but cannot be decoded as an image."""


class WrongChannelCountError(MimicmarkError):
    """Operation requires a different number of color channels."""


class DimensionMismatchError(MimicmarkError):
    """Operands have incompatible shapes."""


class TooSmallError(MimicmarkError):
    """Image is below the 64x64 minimum for watermarking."""


class CapacityExceededError(MimicmarkError):
    """payload_length * redundancy exceeds the embeddable block count."""


class BadBlockSizeError(MimicmarkError):
    """Block transforms support 4x4 and 8x8 tiles only."""


class NonFiniteInputError(MimicmarkError):
    """NaN or Inf encountered where finite values are required."""


class EmptyPlaneError(MimicmarkError):
    """Transform input has zero area."""


class LengthMismatchError(MimicmarkError):
    """Bit vectors being compared have different lengths."""


class BadParameterError(MimicmarkError):
    """Attack or codec parameter outside its documented range."""


class UnknownPresetError(MimicmarkError):
    """Requested channel preset is not in the shipped catalog."""


class DegenerateHistogramError(MimicmarkError):
    """Histogram has a single nonempty bin at an extreme; cannot be fitted."""


class BitLengthMismatchError(MimicmarkError):
    """Channel models being combined use different payload lengths."""


class EmptySampleSetError(MimicmarkError):
    """Statistic requested over zero samples."""


class TooFewSamplesError(MimicmarkError):
    """Not enough samples for the requested statistical test."""


class NullMismatchError(MimicmarkError):
    """Null model and sample set disagree on payload length."""


class IdenticalPayloadsError(MimicmarkError):
    """Authorized and unauthorized payloads must differ."""


class DuplicateRecordError(MimicmarkError):
    """(artist_id, role) already registered and duplicates not allowed."""


class RecordNotFoundError(MimicmarkError):
    """No registry record matches the query."""


class RegistryFormatError(MimicmarkError):
    """Registry store contains an unparseable line."""
