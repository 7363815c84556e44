"""
Harmonic solver - Nystrom double-layer operator

Interior Dirichlet problems are solved with the double-layer representation

    u(x) = sum_j k(x, y_j) sigma_j w_j + sum_k A_k ln|x - z_k|,
    k(x, y) = (1 / 2 pi) nu_y . (x - y) / |x - y|^2,

one logarithmic source z_k per hole plus the constraint that sigma integrates
to zero on that hole. The domain lies to the left of each loop and nu is the
outward normal.
"""

import logging
import threading
from functools import cached_property

import numpy as np
from django.conf import settings
from scipy.linalg import lu_factor, lu_solve

from geometry.curves import loop_frame, winding_number

from .dumps import write_matrix
from .exceptions import NearBoundaryError, OutsideDomainError, SingularSystemError, SolverError
from .kernels import (
    barycentric_cauchy,
    cauchy_derivatives,
    harmonic_tensors,
    log_derivatives,
    spectral_derivative,
)

logger = logging.getLogger(__name__)

# Points this far outside (relative to the diameter) still count as boundary points
BOUNDARY_SLACK = 1e-10


def _hole_source(loop, samples=256):
    """A point well inside a hole: its polygon centroid, or the deepest grid point."""
    s = 2 * np.pi * np.arange(samples) / samples
    polygon = loop.evaluate(s)[0]
    centroid = polygon.mean(axis=0)
    if winding_number(polygon, centroid[None, :])[0] != 0:
        return centroid
    lo, hi = polygon.min(axis=0), polygon.max(axis=0)
    xs, ys = np.meshgrid(np.linspace(lo[0], hi[0], 40), np.linspace(lo[1], hi[1], 40))
    candidates = np.column_stack([xs.ravel(), ys.ravel()])
    candidates = candidates[winding_number(polygon, candidates) != 0]
    if not len(candidates):
        raise SingularSystemError('Could not place a logarithmic source inside a hole')
    depth = np.min(np.hypot(*(candidates[:, None, :] - polygon[None, :, :]).transpose(2, 0, 1)), axis=1)
    return candidates[np.argmax(depth)]


class SolverOperator:
    """
    Assembled and LU-factorized Nystrom system for one domain.
    Immutable after construction; solves and evaluations are thread safe.
    """

    def __init__(self, domain, n_nodes_per_loop):
        self.domain = domain
        self.n = int(n_nodes_per_loop)
        s = 2 * np.pi * np.arange(self.n) / self.n
        self.step = 2 * np.pi / self.n

        frames = [loop_frame(loop, s) for loop in domain.loops]
        self.nodes = np.concatenate([f['points'] for f in frames])
        d1 = np.concatenate([f['d1'] for f in frames])
        d2 = np.concatenate([f['d2'] for f in frames])
        self.tangents = d1[:, 0] + 1j * d1[:, 1]
        self.second_derivatives = d2[:, 0] + 1j * d2[:, 1]
        self.speed = np.concatenate([f['speed'] for f in frames])
        self.normals = np.concatenate([f['normal'] for f in frames])
        self.curvature = np.concatenate([f['curvature'] for f in frames])
        self.weights = self.speed * self.step
        self.loop_slices = [slice(k * self.n, (k + 1) * self.n) for k in range(domain.n_loops)]
        self.node_spacing = max(float(f['speed'].max()) * self.step for f in frames)
        self.near_radius = settings.ROBIN_NEAR_BOUNDARY_FACTOR * self.node_spacing
        self.hole_sources = np.array([_hole_source(loop) for loop in domain.holes]).reshape(-1, 2)
        self.zeta = self.nodes[:, 0] + 1j * self.nodes[:, 1]

        self.matrix = self._assemble()
        self.matrix.flags.writeable = False
        self._lu = lu_factor(self.matrix, check_finite=True)
        self.factorization_residual = self._check_factorization()
        self._lock = threading.Lock()

    def __repr__(self):
        return f'SolverOperator(loops={self.domain.n_loops}, n={self.n}, size={self.size})'

    @property
    def total_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_holes(self):
        return self.hole_sources.shape[0]

    @property
    def size(self):
        return self.total_nodes + self.n_holes

    def _assemble(self):
        N = self.total_nodes
        diff = self.nodes[:, None, :] - self.nodes[None, :, :]
        r2 = (diff ** 2).sum(axis=-1)
        np.fill_diagonal(r2, 1.0)
        kernel = (diff * self.normals[None, :, :]).sum(axis=-1) / (2 * np.pi * r2)
        np.fill_diagonal(kernel, -self.curvature / (4 * np.pi))

        matrix = np.zeros((self.size, self.size))
        matrix[:N, :N] = kernel * self.weights[None, :] - 0.5 * np.eye(N)
        for k, source in enumerate(self.hole_sources):
            matrix[:N, N + k] = np.log(np.hypot(*(self.nodes - source).T))
            matrix[N + k, self.loop_slices[k + 1]] = self.weights[self.loop_slices[k + 1]]
        return matrix

    def _check_factorization(self):
        probe = np.cos(np.arange(self.size) * 0.7)
        solution = lu_solve(self._lu, probe)
        residual = float(np.abs(self.matrix @ solution - probe).max())
        if not np.isfinite(residual) or residual > 1e-10:
            raise SingularSystemError(f'Factorization residual {residual:.3e} exceeds 1e-10')
        return residual

    def solve(self, rhs):
        return lu_solve(self._lu, rhs)

    def solve_transposed(self, rhs):
        return lu_solve(self._lu, rhs, trans=1)

    def boundary_values(self, g):
        """Node values of g given as a callable on (N, 2) points or as an array."""
        values = g(self.nodes) if callable(g) else np.asarray(g, dtype=float)
        if values.shape[0] != self.total_nodes:
            raise SolverError(f'Boundary data has {values.shape[0]} rows, expected {self.total_nodes}')
        if not np.all(np.isfinite(values)):
            raise SolverError('Boundary data is not finite')
        return values

    def check_points(self, points, near='reject'):
        """Signed distances of points; raises unless they are admissible for ``near``."""
        dist = self.domain.signed_distance(points)
        slack = BOUNDARY_SLACK * self.domain.diameter
        worst = int(np.argmin(dist))
        if dist[worst] < -slack:
            raise OutsideDomainError(
                f'Point {points[worst].tolist()} lies outside the domain (distance {dist[worst]:.3e})',
                distance=float(dist[worst]),
            )
        if near == 'reject' and dist[worst] < self.near_radius:
            raise NearBoundaryError(
                f'Point {points[worst].tolist()} is {dist[worst]:.3e} from the boundary, '
                f'inside the exclusion radius {self.near_radius:.3e}',
                distance=float(dist[worst]),
                radius=self.near_radius,
            )
        return dist


def build_solver(domain, n_nodes_per_loop=None):
    """Assemble and factorize the Nystrom system of ``domain``."""
    n = n_nodes_per_loop or settings.ROBIN_NODES_PER_LOOP
    if n % 2 or n < settings.ROBIN_MIN_NODES_PER_LOOP:
        raise SolverError(
            f'n_nodes_per_loop must be even and >= {settings.ROBIN_MIN_NODES_PER_LOOP}, got {n}'
        )
    try:
        operator = SolverOperator(domain, n)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f'Could not factorize the boundary system: {exc}') from exc
    logger.info(
        'Built solver: %d loops, %d nodes per loop, residual %.2e',
        domain.n_loops, n, operator.factorization_residual,
    )
    if settings.ROBIN_DUMP_MATRICES:
        path = settings.ROBIN_DUMP_DIR / f'system_{domain.n_loops}x{n}.rbnm'
        write_matrix(path, operator.matrix)
        logger.info('Dumped system matrix to %s', path)
    return operator


class LayerDensity:
    """Density sigma at the nodes plus one logarithmic strength per hole."""

    def __init__(self, operator, solution):
        solution = np.asarray(solution, dtype=float)
        if solution.shape != (operator.size,):
            raise SolverError(f'Density has shape {solution.shape}, expected ({operator.size},)')
        self.operator = operator
        self.values = solution[:operator.total_nodes]
        self.hole_strengths = solution[operator.total_nodes:]
        self.values.flags.writeable = False
        self.hole_strengths.flags.writeable = False
        self._coeff = self.values * operator.tangents * operator.step

    def __repr__(self):
        return f'LayerDensity(nodes={self.values.size}, holes={self.hole_strengths.size})'

    @cached_property
    def boundary_jets(self):
        """
        Interior boundary traces of F, F', F'', F''' for the double-layer part,
        from the principal-value Cauchy sum with its local correction term and
        tangential spectral differentiation.
        """
        op = self.operator
        zeta = op.zeta
        diff = zeta[None, :] - zeta[:, None]
        np.fill_diagonal(diff, 1.0)
        terms = self._coeff[None, :] / diff
        np.fill_diagonal(terms, 0.0)
        principal = terms.sum(axis=1)
        dsigma = np.concatenate([
            spectral_derivative(self.values[sl], op.n).real for sl in op.loop_slices
        ])
        local = op.step * (dsigma + self.values * op.second_derivatives / (2 * op.tangents))
        jets = np.empty((4, zeta.size), dtype=complex)
        jets[0] = -0.5 * self.values - (principal + local) / (2j * np.pi)
        for k in range(1, 4):
            for sl in op.loop_slices:
                jets[k, sl] = spectral_derivative(jets[k - 1, sl], op.n) / op.tangents[sl]
        return jets

    def evaluate(self, points, order=0, near='reject'):
        """
        Value and derivative tensors up to ``order`` at points.
        near='reject' refuses points inside the exclusion radius;
        near='collar' evaluates them, boundary included, from the boundary jets.
        """
        if not 0 <= order <= 3:
            raise ValueError(f'Evaluation order {order} outside 0..3')
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        points = np.atleast_2d(points)
        op = self.operator
        dist = op.check_points(points, near)
        z = points[:, 0] + 1j * points[:, 1]

        derivs = np.empty((order + 1, z.size), dtype=complex)
        far = dist >= op.near_radius
        if far.any():
            derivs[:, far] = cauchy_derivatives(z[far], op.zeta, self._coeff, order)
        if (~far).any():
            weights = op.tangents * op.step
            derivs[:, ~far] = barycentric_cauchy(
                z[~far], op.zeta, weights, self.boundary_jets[:order + 1]
            )
        if op.n_holes:
            derivs += log_derivatives(z, op.hole_sources[:, 0] + 1j * op.hole_sources[:, 1],
                                      self.hole_strengths, order)
        tensors = harmonic_tensors(derivs, order)
        if single:
            tensors = [tensor[0] for tensor in tensors]
        return tensors


def solve_dirichlet(op, g):
    """Density of the harmonic function with boundary values g."""
    rhs = np.zeros(op.size)
    rhs[:op.total_nodes] = op.boundary_values(g)
    return LayerDensity(op, op.solve(rhs))


def solve_dirichlet_batch(op, data):
    """One density per column of node data (N, k), sharing a single LU solve."""
    data = np.asarray(data, dtype=float)
    rhs = np.zeros((op.size, data.shape[1]))
    rhs[:op.total_nodes] = data
    solution = op.solve(rhs)
    return [LayerDensity(op, solution[:, k]) for k in range(data.shape[1])]


def eval_interior(density, x, order=0):
    """Plain Nystrom evaluation; rejects points in the near-boundary exclusion zone."""
    return density.evaluate(x, order, near='reject')


def harmonic_measure_density(op, y):
    """
    Node values of dG/dnu(., y) (outward normal, Delta G = -delta_y).
    The discrete harmonic measure comes from one transposed solve.
    """
    y = np.asarray(y, dtype=float)
    op.check_points(y[None, :], near='reject')
    N = op.total_nodes
    diff = y[None, :] - op.nodes
    kernel = (diff * op.normals).sum(axis=1) / (2 * np.pi * (diff ** 2).sum(axis=1))
    row = np.empty(op.size)
    row[:N] = kernel * op.weights
    for k, source in enumerate(op.hole_sources):
        row[N + k] = np.log(np.hypot(*(y - source)))
    measure = op.solve_transposed(row)[:N]
    return -measure / op.weights


def circle_average(density, center, radius, samples=64):
    """Mean of the represented function over a circle (mean value diagnostics)."""
    angles = 2 * np.pi * np.arange(samples) / samples
    points = np.asarray(center) + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return float(density.evaluate(points)[0].mean())
