"""Exception hierarchy shared by every module in the toolkit."""


class LeadLagError(ValueError):
    """Base class for all toolkit errors."""


class EmptyIntersection(LeadLagError):
    pass


class TooShort(LeadLagError):
    pass


# Same condition, named as the analysis modules describe it.
SeriesTooShort = TooShort


class KTooLarge(LeadLagError):
    pass


class ZeroVariance(LeadLagError):
    """A Pearson input is constant. ``lag`` is set when raised from a CCF."""

    def __init__(self, message: str, lag: int | None = None):
        super().__init__(message)
        self.lag = lag


class TooFewPoints(LeadLagError):
    pass


class RankDeficient(LeadLagError):
    pass


class MixedLagWindows(LeadLagError):
    pass


class TooFewEntities(LeadLagError):
    pass


class BootstrapFailure(LeadLagError):
    """Too many singular bootstrap draws in a row."""


class EmptyWindow(LeadLagError):
    pass


class NoSuchTicker(LeadLagError):
    pass


class NonStationaryConfig(LeadLagError):
    pass


class ConstantSeries(LeadLagError):
    pass


class EmptyList(LeadLagError):
    pass


class ParseError(LeadLagError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateDate(ParseError):
    def __init__(self, line: int, date):
        super().__init__(line, f"duplicate date {date}")
        self.date = date


class NegativeValue(ParseError):
    def __init__(self, line: int, value: float):
        super().__init__(line, f"negative value {value!r}")
        self.value = value
