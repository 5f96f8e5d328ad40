"""Exception types raised across the package."""


class EmospreadError(Exception):
    """Base class for all package errors."""


# ingestion
class MalformedLine(EmospreadError, ValueError):
    pass


class BadTimestamp(EmospreadError, ValueError):
    pass


class BadGcam(EmospreadError, ValueError):
    pass


# emotion indicators
class EmptyDay(EmospreadError, ValueError):
    pass


class ZeroDenominator(EmospreadError, ZeroDivisionError):
    pass


class WindowTooLong(EmospreadError, ValueError):
    pass


class DegenerateSeries(EmospreadError, ValueError):
    pass


# quantile regression
class RankDeficient(EmospreadError, ValueError):
    pass


class NonConvergence(EmospreadError, RuntimeError):
    pass


class ZeroRestrictedLoss(EmospreadError, ValueError):
    pass


class UnboundedInterval(EmospreadError, ValueError):
    pass


class MissingRegressor(EmospreadError, KeyError):
    pass


# frames and rolling estimation
class CalendarMismatch(EmospreadError, ValueError):
    pass


class InsufficientRows(EmospreadError, ValueError):
    pass


# fluctuation test
class TooShort(EmospreadError, ValueError):
    pass


class ZeroVariance(EmospreadError, ValueError):
    pass


class UnsupportedMu(EmospreadError, ValueError):
    pass


# market data and pipeline
class BadRow(EmospreadError, ValueError):
    pass


class DuplicateDate(EmospreadError, ValueError):
    pass


class EmptyFile(EmospreadError, ValueError):
    pass


class EmptyYear(EmospreadError, ValueError):
    pass


class InvalidSpec(EmospreadError, ValueError):
    pass


class ConfigError(EmospreadError, ValueError):
    pass


class StageError(EmospreadError, RuntimeError):
    """A pipeline stage failed; carries the stage name and offending input."""

    def __init__(self, stage, detail, source=None):
        self.stage = stage
        self.detail = detail
        self.source = source
        msg = f"[{stage}] {detail}"
        if source is not None:
            msg += f" (input: {source})"
        super().__init__(msg)
