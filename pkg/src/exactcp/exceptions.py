"""Exception hierarchy shared by every module of the package."""


class ExactCPError(Exception):
    """Base class for errors raised by exactcp."""


class DimensionError(ExactCPError, ValueError):
    """Feature vectors disagree with the declared dimension of a sample."""


class NonFiniteScoreError(ExactCPError, ArithmeticError):
    """A nonconformity measure produced ``inf`` or ``nan``."""


class DomainError(ExactCPError, ValueError):
    """A measure was evaluated outside the domain where it is finite."""


class ScanWindowError(ExactCPError, RuntimeError):
    """The oracle's scan window does not contain every region boundary."""


class RankDeficientError(ExactCPError, ValueError):
    """The least-squares design matrix does not have full column rank."""
