"""
Critical points of the Robin function

Multistart damped Newton on grad t from a deterministic tensor grid of
starts, followed by deduplication and eigenvalue classification.
"""

import logging

import numpy as np
from django.conf import settings
from joblib import Parallel, delayed

from greens_robin.services import ROBIN_MARGIN, regular_part, robin_jet

from .exceptions import AsymmetricHessianError, NoConvergentStartError

logger = logging.getLogger(__name__)

MINIMUM = 'nondegenerate-min'
SADDLE = 'nondegenerate-saddle'
MAXIMUM = 'nondegenerate-max'
DEGENERATE = 'degenerate'

# Above this condition number the Newton step is replaced by a gradient step
CONDITION_LIMIT = 1e8
MAX_HALVINGS = 30


class CriticalPoint:

    def __init__(self, location, residual, hessian, eigenvalues, classification, basin):
        self.location = np.asarray(location, dtype=float)
        self.residual = float(residual)
        self.hessian = hessian
        self.eigenvalues = eigenvalues
        self.classification = classification
        self.basin = basin

    def __repr__(self):
        return f'CriticalPoint({self.location.tolist()}, {self.classification})'

    @property
    def min_abs_eigenvalue(self):
        return float(np.abs(self.eigenvalues).min())

    def as_row(self):
        return {
            'x1': self.location[0],
            'x2': self.location[1],
            'residual': self.residual,
            'lam1': self.eigenvalues[0],
            'lam2': self.eigenvalues[1],
            'class': self.classification,
            'basin': self.basin,
        }


def F_map(op, x):
    """grad_x H_y(x) at y = x, i.e. grad t / 2."""
    x = np.asarray(x, dtype=float)
    return regular_part(op, x).evaluate(x, order=1)[1]


def symmetric_eigenvalues(H):
    """Ascending eigenvalues of a symmetric 2 x 2 matrix, in closed form."""
    mean = 0.5 * (H[0, 0] + H[1, 1])
    radius = np.hypot(0.5 * (H[0, 0] - H[1, 1]), H[0, 1])
    return np.array([mean - radius, mean + radius])


def classify_nondegeneracy(H, degeneracy_tol=None):
    """Return (tag, ascending eigenvalues) for a symmetric 2 x 2 Hessian."""
    degeneracy_tol = settings.ROBIN_DEGENERACY_TOL if degeneracy_tol is None else degeneracy_tol
    H = np.asarray(H, dtype=float)
    if abs(H[0, 1] - H[1, 0]) > 1e-8:
        raise AsymmetricHessianError(f'Hessian is not symmetric: {H.tolist()}')
    eigenvalues = symmetric_eigenvalues(H)
    magnitudes = np.abs(eigenvalues)
    if magnitudes.min() < degeneracy_tol * max(1.0, magnitudes.max()):
        return DEGENERATE, eigenvalues
    if eigenvalues[0] > 0:
        return MINIMUM, eigenvalues
    if eigenvalues[1] < 0:
        return MAXIMUM, eigenvalues
    return SADDLE, eigenvalues


def search_margin(op):
    """Starts and accepted roots keep this distance from the boundary."""
    return max(0.1 * op.domain.inradius, op.near_radius, ROBIN_MARGIN * op.domain.diameter) * 1.01


def _newton_step(jet):
    eigenvalues = symmetric_eigenvalues(jet.hessian)
    magnitudes = np.abs(eigenvalues)
    if magnitudes.min() == 0 or magnitudes.max() / magnitudes.min() > CONDITION_LIMIT:
        return -jet.gradient / magnitudes.max()
    return -np.linalg.solve(jet.hessian, jet.gradient)


def _newton_from(op, start, basin, tol, max_iter, margin):
    """
    Damped Newton from one start; returns (x, jet, basin) or None when the
    iteration stalls. Solver failures propagate to the caller.
    """
    x = np.asarray(start, dtype=float)
    jet = robin_jet(op, x)
    for _ in range(max_iter):
        size = np.linalg.norm(jet.gradient)
        if size <= tol:
            break
        step = _newton_step(jet)
        for _ in range(MAX_HALVINGS):
            trial = x + step
            if op.domain.signed_distance(trial[None, :])[0] > margin:
                trial_jet = robin_jet(op, trial)
                if np.linalg.norm(trial_jet.gradient) < size:
                    x, jet = trial, trial_jet
                    break
            step = 0.5 * step
        else:
            return None
    # the last accepted step may itself have converged
    if np.linalg.norm(jet.gradient) > tol:
        return None
    # polish: accept one more full step when it lowers the residual
    trial = x + _newton_step(jet)
    if op.domain.signed_distance(trial[None, :])[0] > margin:
        trial_jet = robin_jet(op, trial)
        if np.linalg.norm(trial_jet.gradient) < np.linalg.norm(jet.gradient):
            x, jet = trial, trial_jet
    return x, jet, basin


def multistart_grid(domain, per_axis, margin):
    """
    Tensor-grid starts at least margin inside the domain. Thin domains such
    as narrow annuli leave few nodes of the coarse grid inside, so the grid
    is refined until it holds per_axis starts or four refinements are spent.
    """
    density = per_axis
    starts = domain.interior_grid(density, margin)
    for _ in range(4):
        if len(starts) >= per_axis:
            break
        density *= 2
        starts = domain.interior_grid(density, margin)
        logger.debug('Multistart grid refined to %d per axis (%d starts)', density, len(starts))
    return starts


def find_critical_points(op, grid_density=None, newton_tol=None, max_iter=None, degeneracy_tol=None, workers=None):
    """
    Multistart damped Newton on grad t. Converged roots are deduplicated
    within 10 * newton_tol; the basin label is the first start reaching a root.
    """
    grid_density = grid_density or settings.ROBIN_MULTISTART_GRID
    newton_tol = newton_tol or settings.ROBIN_NEWTON_TOL
    max_iter = max_iter or settings.ROBIN_NEWTON_MAX_ITER
    workers = workers or settings.ROBIN_WORKERS
    if grid_density < 8:
        raise ValueError(f'Multistart grid needs at least 8 points per axis, got {grid_density}')
    if newton_tol <= 0:
        raise ValueError('Newton tolerance must be positive')

    margin = search_margin(op)
    starts = multistart_grid(op.domain, grid_density, margin)
    runs = Parallel(n_jobs=workers, prefer='threads')(
        delayed(_newton_from)(op, start, index, newton_tol, max_iter, margin)
        for index, start in enumerate(starts)
    )
    converged = [run for run in runs if run is not None]
    if not converged:
        raise NoConvergentStartError(
            f'None of {len(starts)} Newton starts converged to |grad t| <= {newton_tol:.1e}',
            starts=len(starts),
        )

    points = []
    for x, jet, basin in sorted(converged, key=lambda run: run[2]):
        if any(np.linalg.norm(x - kept.location) <= 10 * newton_tol for kept in points):
            continue
        classification, eigenvalues = classify_nondegeneracy(jet.hessian, degeneracy_tol)
        points.append(CriticalPoint(x, np.linalg.norm(jet.gradient), jet.hessian, eigenvalues, classification, basin))
    logger.info(
        '%d critical points from %d of %d starts', len(points), len(converged), len(starts),
    )
    return points


def summarize(points, center=None):
    """
    Class counts, smallest |eigenvalue| and the shape of the found set.
    Radii are measured from center, normally the domain centroid.
    """
    center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    counts = {tag: 0 for tag in (MINIMUM, SADDLE, MAXIMUM, DEGENERATE)}
    for point in points:
        counts[point.classification] += 1
    radii = np.array([np.linalg.norm(point.location - center) for point in points])
    return {
        'count': len(points),
        'counts': counts,
        'min_abs_eigenvalue': min((point.min_abs_eigenvalue for point in points), default=None),
        'all_nondegenerate': bool(points) and counts[DEGENERATE] == 0,
        'mean_radius': float(radii.mean()) if len(radii) else None,
        'radial_spread': float(np.ptp(radii)) if len(radii) else None,
        'minima_saddle_pairing': counts[MINIMUM] == counts[SADDLE],
    }
