"""Exception types shared across the package."""


class FourierDimError(Exception):
    """Base class for all package errors."""


class DegenerateJacobian(FourierDimError):
    """Chart jacobian has rank < param_dim at the requested point."""


class QuadratureNotConverged(FourierDimError):
    """Panel doubling exhausted without meeting the tolerance.

    Carries the last two refinement values so callers can inspect how far
    apart the refinements still were.
    """

    def __init__(self, message, previous=None, latest=None):
        super().__init__(message)
        self.previous = previous
        self.latest = latest


class NewtonStall(FourierDimError):
    """A Newton seed failed to converge within the iteration budget."""


class DegenerateCritical(FourierDimError):
    """Critical point has (numerically) singular Hessian."""


class ValidityCollapse(FourierDimError):
    """Morse normalization validity box shrank below the minimum half-width."""


class RankMismatch(FourierDimError):
    """Measured curvature rank disagrees with the catalog annotation."""


class AllFloored(FourierDimError):
    """Every decay sample fell below the quadrature noise floor."""
