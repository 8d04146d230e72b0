"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a function (negative time, bad index)."""


class InfiniteMeanError(ValueError):
    """Service law whose mean or tail integral diverges."""


class RegimeError(ValueError):
    """Operation requested for a tail regime it does not apply to."""


class GridMismatchError(ValueError):
    """Two grid functions with different step or length were combined."""


class SeriesTruncationError(RuntimeError):
    """The busy-period series cannot reach the requested tolerance."""

    def __init__(self, message, required_terms):
        super().__init__(message)
        self.required_terms = required_terms


class RunawayCycleError(RuntimeError):
    """A simulated busy period exceeded the event budget."""
