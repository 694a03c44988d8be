"""Exception hierarchy shared by all fwsparse modules."""


class FwSparseError(Exception):
    """Base class for every error raised by fwsparse."""


class DictionaryError(FwSparseError, ValueError):
    pass


class NonFinite(DictionaryError):
    pass


class ZeroColumn(DictionaryError):
    pass


class NotUnitNorm(DictionaryError):
    pass


class SingleAtom(DictionaryError):
    pass


class RangeError(DictionaryError):
    pass


class RankDeficientSupport(DictionaryError):
    pass


class BoundVacuous(DictionaryError):
    pass


class DimensionMismatch(FwSparseError, ValueError):
    pass


class ZeroResidual(FwSparseError, ValueError):
    pass


class DegenerateDirection(FwSparseError, ValueError):
    pass


class RankDeficientSelection(FwSparseError, ValueError):
    pass


class UndefinedRatio(FwSparseError, ValueError):
    pass


class ConditionViolated(FwSparseError, ValueError):
    """A theoretical bound was requested outside its hypotheses."""


class MismatchedTrace(FwSparseError, ValueError):
    pass


class ConfigError(FwSparseError, ValueError):
    pass


class SparsityExceedsN(ConfigError):
    pass
