"""Exception types shared across the package."""


class FgAnnealError(Exception):
    """Base class for package errors."""


class BudgetExceeded(FgAnnealError):
    """A configured memory or enumeration budget would be exceeded."""


class DegenerateMessage(FgAnnealError):
    """A message update produced an all-zero (or non-finite) vector."""


class Infeasible(FgAnnealError):
    """No distribution satisfies the requested constraints.

    Carries a certificate direction along which the dual is unbounded.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NoStationaryPoint(FgAnnealError):
    """No stationary point was found by any solver or restart."""


class SolverAbort(FgAnnealError):
    """A solver hit a hard numerical guard (e.g. Poisson rate overflow)."""
