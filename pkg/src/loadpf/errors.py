"""Exception hierarchy shared by every module of the package."""


class LoadPFError(Exception):
    """Base class for all errors raised by loadpf."""


class AllWeightsZero(LoadPFError):
    """Every unnormalised weight is zero (total degeneracy or underflow)."""


class NonFiniteWeight(LoadPFError):
    """A weight or likelihood evaluated to NaN or infinity."""


class NonFiniteResult(LoadPFError):
    """An ensemble estimate is not finite."""


class EmptyEnsemble(LoadPFError):
    pass


class DegenerateCovariance(LoadPFError):
    """The particle cloud has zero spread in every coordinate."""


class IntervalEmpty(LoadPFError):
    pass


class AllZero(LoadPFError):
    pass


class MissingExogenous(LoadPFError):
    pass


class NotConverged(LoadPFError):
    """MCMC chains failed the split-R-hat diagnostic."""

    def __init__(self, message, rhat=None):
        super().__init__(message)
        self.rhat = rhat or {}


class InsufficientDraws(LoadPFError):
    pass


class ValidationError(LoadPFError):
    """Bad user input (files, config, flags). Mapped to CLI exit code 2."""


class ParseError(ValidationError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class CalendarGap(ValidationError):
    pass


class ZeroActual(LoadPFError):
    pass
