"""
Geometry errors
"""


class GeometryError(Exception):
    """Base class for domain and deformation failures."""


class CurveValidationError(GeometryError):
    """A boundary curve has a cusp, a self-intersection or overlapping loops."""


class DeformationError(GeometryError):
    """I + theta is not an orientation preserving diffeomorphism of the domain."""


class NonContractiveDeformationError(DeformationError):
    """The fixed-point iteration for the inverse deformation did not converge."""

    def __init__(self, message, iterations=None, increment=None):
        super().__init__(message)
        self.iterations = iterations
        self.increment = increment


class SingularJacobianError(DeformationError):
    """I + theta' is singular at the requested point."""


class DerivativeOrderError(GeometryError, ValueError):
    """Requested derivative order is not available."""


class GeometrySpecError(GeometryError, ValueError):
    """A JSON domain or deformation document is malformed."""
