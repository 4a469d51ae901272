"""Exception types raised across the package."""


class RectifierError(Exception):
    """Base class for all package errors."""


class NotConductingError(RectifierError, ValueError):
    """Drive amplitude never exceeds the diode threshold."""


class NoConvergenceError(RectifierError, RuntimeError):
    """Output did not settle within the simulation horizon."""


class InfeasibleError(RectifierError, ValueError):
    """No constellation with positive spacing meets the power target."""


class LengthMismatchError(RectifierError, ValueError):
    pass


class BudgetExceededError(RectifierError, ValueError):
    """Candidate sequence enumeration is larger than the configured budget."""


class OverlapError(RectifierError, ValueError):
    """Adjacent output ranges intersect, so range-based ML is unusable."""
