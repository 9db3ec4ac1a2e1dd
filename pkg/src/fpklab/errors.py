"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class;
anything else surfaces as a plain ValueError from the offending call site.
"""


class FpkError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FpkError):
    """An argument lies outside the mathematical domain of the operation."""


class DimensionError(FpkError):
    """Operands live in incompatible or unsupported dimensions."""


class NonIntegrable(FpkError):
    """A quadrature failed to reach the requested tolerance."""


class InvalidWeight(FpkError):
    """A weight function dips below 1 on the relevant support."""


class SolverFailure(FpkError):
    """The LP solver did not return a clean optimum."""


class SizeLimit(FpkError):
    """An exact enumeration was requested beyond its supported size."""


class InsufficientData(FpkError):
    """A sampled curve does not span enough decades for classification."""


class DivergentIntegral(FpkError):
    """A time-change integral diverges at the origin."""


class GridTooCoarse(FpkError):
    """A time grid carries too few points for the requested quadrature."""


class RootNotBracketed(FpkError):
    """A bisection interval does not exhibit a sign change."""


class UnstableScheme(FpkError):
    """A finite-difference solve produced non-finite values."""


class BlowUp(FpkError):
    """A particle left the admissible region during simulation."""

    def __init__(self, time: float, message: str | None = None):
        self.time = time
        super().__init__(message or f"particle system blew up at t={time:.6g}")


class GridMismatch(FpkError):
    """Two flows do not share a usable common time grid."""
