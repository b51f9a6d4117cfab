"""Exception types raised across the package.

All of them derive from ``ValueError`` so callers that only care about
"bad input" can catch a single class.
"""


class HamEmbError(ValueError):
    pass


class NonSquareInput(HamEmbError):
    pass


class NonHermitianInput(HamEmbError):
    pass


class ShapeMismatch(HamEmbError):
    pass


class DimensionMismatch(ShapeMismatch):
    pass


class NonUnitaryGate(HamEmbError):
    pass


class QubitCountOutOfRange(HamEmbError):
    pass


class BadTargetList(HamEmbError):
    pass


class BadBlockSize(HamEmbError):
    pass


class TargetTooSmall(HamEmbError):
    pass


class ZeroVector(HamEmbError):
    pass


class ArityOutOfRange(HamEmbError):
    pass


class ParamLengthMismatch(ShapeMismatch):
    pass


class UnsupportedLayout(HamEmbError):
    pass


class TooManyClasses(HamEmbError):
    pass


class LabelOutOfRange(HamEmbError):
    pass


class EmptyDataset(HamEmbError):
    pass


class ConfigInvalid(HamEmbError):
    pass


class InsufficientSamples(HamEmbError):
    pass


class BadMagic(HamEmbError):
    pass


class TruncatedFile(HamEmbError):
    pass


class CountMismatch(HamEmbError):
    pass


class ParseError(HamEmbError):
    pass
