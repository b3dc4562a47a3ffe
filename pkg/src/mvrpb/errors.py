class MvrpbError(Exception):
    """Base class for every error raised by this package."""


class InvalidClient(MvrpbError, IndexError):
    pass


# parsing
class ParseError(MvrpbError, ValueError):
    pass


class MissingSection(ParseError):
    pass


class NonIntegerField(ParseError):
    pass


class DepotDemandNonzero(ParseError):
    pass


# generation
class TooFewClients(MvrpbError, ValueError):
    pass


class InvalidHorizon(MvrpbError, ValueError):
    pass


class InvalidPlan(MvrpbError, ValueError):
    pass


# routing
class InfeasibleClient(MvrpbError, ValueError):
    pass


class TooLarge(MvrpbError, ValueError):
    pass


class Timeout(MvrpbError):
    pass


class PeriodError(MvrpbError):
    """A per-period failure, tagged with the period index."""

    def __init__(self, period: int, cause: Exception):
        super().__init__(f"period {period}: {type(cause).__name__}: {cause}")
        self.period = period
        self.cause = cause


# balancing
class InsufficientDrivers(MvrpbError, ValueError):
    pass


class DegenerateBound(MvrpbError, ZeroDivisionError):
    pass


class StageError(MvrpbError):
    """Pipeline failure tagged with the stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
