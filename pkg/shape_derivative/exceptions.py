"""
Shape derivative errors
"""


class ShapeDerivativeError(Exception):
    """Base class for shape calculus failures."""


class ClearanceError(ShapeDerivativeError):
    """The cutoff radius violates 4 rho_bar <= dist(eta_bar, boundary)."""

    def __init__(self, message, admissible=None):
        super().__init__(message)
        self.admissible = admissible


class StripQuadratureError(ShapeDerivativeError):
    """The boundary strip cannot be parametrized by (parameter, depth)."""


class ExponentError(ShapeDerivativeError, ValueError):
    """Cutoff exponent below 4 without an explicit negative-control request."""
