"""
Critical point search errors
"""


class CriticalPointError(Exception):
    """Base class for critical point search failures."""


class NoConvergentStartError(CriticalPointError):
    """Every multistart Newton run failed; distinct from a solver failure."""

    def __init__(self, message, starts=0):
        super().__init__(message)
        self.starts = starts


class AsymmetricHessianError(CriticalPointError, ValueError):
    """A Hessian handed to the classifier is not symmetric."""
