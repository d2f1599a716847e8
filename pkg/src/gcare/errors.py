"""Exception hierarchy."""


class GcareError(Exception):
    """Base class for all library errors."""


class InvalidMatrix(GcareError, ValueError):
    """Input is not a finite real 2-D array."""


class DimensionMismatch(GcareError, ValueError):
    pass


class NotSymmetric(GcareError, ValueError):
    pass


class NotPSD(GcareError, ValueError):
    pass


class NotRegular(GcareError, ValueError):
    """The input weight R is singular where a regular problem is required."""


class NoStabilizingSolution(GcareError, ArithmeticError):
    pass


class TerminalPenaltyNotReduced(GcareError, ValueError):
    """The terminal penalty does not annihilate the reachable subspace of (F, B2)."""


class IntegrationDiverged(GcareError, ArithmeticError):
    """Raised when an integration blows up or the step size underflows.

    Attributes
    ----------
    time : float
        Time (in the integration variable) at which the failure occurred.
    reason : str
        ``"ceiling"``, ``"step-underflow"``, ``"non-finite"`` or ``"max-steps"``.
    """

    def __init__(self, message, time=float("nan"), reason="", growth=None):
        super().__init__(message)
        self.time = time
        self.reason = reason
        self.growth = growth


class NoConvergence(GcareError, ArithmeticError):
    """The forward Riccati flow did not settle before the time limit.

    ``growth`` carries a :class:`gcare.riccati.GrowthDiagnostic` so callers can
    tell slow convergence from a genuinely unbounded flow.
    """

    def __init__(self, message, growth=None, trajectory=None):
        super().__init__(message)
        self.growth = growth
        self.trajectory = trajectory


class ProblemFileError(GcareError, ValueError):
    """Malformed problem file. ``location`` is a line/column or a field path."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
