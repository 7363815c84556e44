"""
Green and Robin function errors
Solver errors propagate unchanged; only the coincident-point case is new here.
"""

from harmonic_solver.exceptions import SolverError


class CoincidentPointsError(SolverError, ValueError):
    """Green function or singular part requested at x = y."""
