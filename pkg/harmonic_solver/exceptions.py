"""
Harmonic solver errors
"""


class SolverError(Exception):
    """Base class for boundary integral solver failures."""


class SingularSystemError(SolverError):
    """The assembled system could not be factorized to the required residual."""


class OutsideDomainError(SolverError, ValueError):
    """An evaluation point lies outside the domain."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class NearBoundaryError(SolverError, ValueError):
    """An evaluation point lies inside the near-boundary exclusion zone."""

    def __init__(self, message, distance=None, radius=None):
        super().__init__(message)
        self.distance = distance
        self.radius = radius


class QuadratureGridError(SolverError):
    """No boundary-fitted volume grid exists for this geometry."""
