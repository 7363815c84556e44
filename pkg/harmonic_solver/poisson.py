"""
Harmonic solver - Poisson problems

Delta u = f in Omega, u = g on the boundary, solved as u = N[f] + h with the
Newton potential N[f](x) = (1 / 2 pi) int ln|x - y| f(y) dy and h the
harmonic correction with data g - N[f].

The volume integral runs over a boundary-fitted (radius x parameter) grid,
or over loop collars blended with a Cartesian patch for several holes.
Near the target the second-order Taylor polynomial of f is subtracted; its
log-kernel moments are reduced to boundary integrals by Green's theorem, so
the remaining integrand vanishes to third order at the target.
"""

import logging

import numpy as np
from django.conf import settings
from scipy.linalg import circulant

from geometry.curves import cross, loop_frame

from .exceptions import QuadratureGridError, SolverError
from .kernels import CHUNK, kress_log_weights
from .operators import solve_dirichlet

logger = logging.getLogger(__name__)

# Finite-difference step for the Taylor data of f, relative to the diameter
TAYLOR_STEP = 5e-4


class VolumeGrid:
    """Quadrature points and weights over Omega; weights include the map determinant."""

    def __init__(self, points, weights, layout):
        self.points = points
        self.weights = weights
        self.layout = layout
        self.points.flags.writeable = False
        self.weights.flags.writeable = False

    def __repr__(self):
        return f'VolumeGrid({self.layout}, points={len(self)})'

    def __len__(self):
        return self.weights.size

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def build_volume_grid(domain, radial_nodes=None, angular_nodes=None):
    """
    Gauss-Legendre in the radial coordinate times the trapezoid rule in the
    loop parameter. Simply connected domains are swept from the centroid,
    one-hole domains between the hole and the outer loop. Everything else,
    and any domain these sweeps cannot cover, gets a blended grid.
    """
    radial_nodes = radial_nodes or settings.ROBIN_VOLUME_RADIAL_NODES
    angular_nodes = angular_nodes or settings.ROBIN_VOLUME_ANGULAR_FACTOR * settings.ROBIN_NODES_PER_LOOP
    if domain.n_loops <= 2:
        try:
            return _swept_grid(domain, radial_nodes, angular_nodes)
        except QuadratureGridError as exc:
            logger.debug('Swept grid unavailable (%s), blending instead', exc)
    return _blended_grid(domain, max(8, radial_nodes // 2), angular_nodes)


def _swept_grid(domain, radial_nodes, angular_nodes):
    x, wx = np.polynomial.legendre.leggauss(radial_nodes)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * wx
    s = 2 * np.pi * np.arange(angular_nodes) / angular_nodes
    ds = 2 * np.pi / angular_nodes
    c, dc = domain.outer.evaluate(s, order=1)

    if domain.n_loops == 1:
        center = domain.centroid
        sweep = cross(c - center, dc)
        if sweep.min() <= 0:
            raise QuadratureGridError('Domain is not star-shaped about its centroid')
        points = center + r[:, None, None] * (c - center)[None, :, :]
        det = r[:, None] * sweep[None, :]
    else:
        hole, dhole = domain.holes[0].evaluate(-s, order=1)
        inner = hole
        dinner = -dhole
        along = c - inner
        points = (1 - r)[:, None, None] * inner[None] + r[:, None, None] * c[None]
        tangent = (1 - r)[:, None, None] * dinner[None] + r[:, None, None] * dc[None]
        det = cross(along[None, :, :], tangent)
        edges = [cross(along, dinner), cross(along, dc)]
        if det.min() <= 0 or min(edge.min() for edge in edges) <= 0:
            raise QuadratureGridError('Hole and outer loop parametrizations do not sweep a valid grid')

    weights = wr[:, None] * ds * det
    grid = VolumeGrid(points.reshape(-1, 2), weights.ravel(), f'swept {radial_nodes}x{angular_nodes}')
    logger.debug('Volume grid %r, area %.6f', grid, weights.sum())
    return grid


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    rise = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    fall = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return rise / (rise + fall)


def collar_width(domain, samples=256):
    """
    Depth of the boundary collars of a blended grid: inside the reach of every
    loop and at most a fraction of the gaps between loops.
    """
    s = 2 * np.pi * np.arange(samples) / samples
    width = 0.5 * domain.inradius
    polygons = []
    for loop in domain.loops:
        frame = loop_frame(loop, s)
        bending = frame['curvature'].max()
        if bending > 0:
            width = min(width, 0.5 / bending)
        polygons.append(frame['points'])
    for i, a in enumerate(polygons):
        for b in polygons[i + 1:]:
            gap = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1).min())
            width = min(width, 0.45 * gap)
    if width <= 0:
        raise QuadratureGridError('Loops touch; no collar fits between them')
    return width


def _blended_grid(domain, radial_nodes, angular_nodes):
    """
    Partition of unity eta(x) = step(dist(x) / width): each loop carries a
    collar grid (Gauss in depth, trapezoid along the loop) for f (1 - eta),
    and a Cartesian trapezoid grid covers f eta, which vanishes smoothly
    before the boundary. Works for any number of holes.
    """
    width = collar_width(domain)
    weight_of = lambda points: _smooth_step((domain.signed_distance(points) / width - 0.1) / 0.8)

    x, wx = np.polynomial.legendre.leggauss(radial_nodes)
    depth = 0.5 * width * (x + 1.0)
    wdepth = 0.5 * width * wx
    s = 2 * np.pi * np.arange(angular_nodes) / angular_nodes
    ds = 2 * np.pi / angular_nodes
    points, weights = [], []
    for loop in domain.loops:
        frame = loop_frame(loop, s)
        collar = frame['points'][None, :, :] - depth[:, None, None] * frame['normal'][None, :, :]
        det = frame['speed'][None, :] * (1 - depth[:, None] * frame['curvature'][None, :])
        collar = collar.reshape(-1, 2)
        points.append(collar)
        weights.append((wdepth[:, None] * ds * det).ravel() * (1 - weight_of(collar)))

    xmin, xmax, ymin, ymax = domain.bounding_box()
    spacing = width / settings.ROBIN_VOLUME_CELLS_PER_COLLAR
    xs = np.arange(xmin, xmax + spacing, spacing)
    ys = np.arange(ymin, ymax + spacing, spacing)
    gx, gy = np.meshgrid(xs, ys)
    cartesian = np.column_stack([gx.ravel(), gy.ravel()])
    eta = weight_of(cartesian)
    inside = eta > 0
    points.append(cartesian[inside])
    weights.append(spacing ** 2 * eta[inside])

    points = np.concatenate(points)
    weights = np.concatenate(weights)
    keep = weights != 0
    grid = VolumeGrid(
        np.ascontiguousarray(points[keep]), np.ascontiguousarray(weights[keep]),
        f'blended collar={width:.4f} spacing={spacing:.4f}',
    )
    logger.debug('Volume grid %r, area %.6f', grid, grid.weights.sum())
    return grid


def _taylor_data(f, targets, centers, step):
    """f at targets, gradient and Hessian at targets from a 9-point stencil at centers."""
    offsets = step * np.array([
        [0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1],
    ])
    samples = f((centers[:, None, :] + offsets[None, :, :]).reshape(-1, 2)).reshape(-1, 9)
    f0 = samples[:, 0]
    grad = np.column_stack([samples[:, 1] - samples[:, 2], samples[:, 3] - samples[:, 4]]) / (2 * step)
    hess = np.empty((targets.shape[0], 2, 2))
    hess[:, 0, 0] = (samples[:, 1] - 2 * f0 + samples[:, 2]) / step ** 2
    hess[:, 1, 1] = (samples[:, 3] - 2 * f0 + samples[:, 4]) / step ** 2
    hess[:, 0, 1] = hess[:, 1, 0] = (samples[:, 5] - samples[:, 6] - samples[:, 7] + samples[:, 8]) / (4 * step ** 2)
    grad = grad + np.einsum('mab,mb->ma', hess, targets - centers)
    return f(targets), grad, hess


def _log_weights(op, targets, on_boundary):
    """
    Matrix Lambda with sum_j Lambda[i, j] X_j ~ int X ln|y - x_i| ds_y.
    Boundary targets (the operator nodes) use product quadrature on their own loop.
    """
    rel = op.nodes[None, :, :] - targets[:, None, :]
    r2 = (rel ** 2).sum(axis=-1)
    if not on_boundary:
        return op.weights[None, :] * 0.5 * np.log(r2)
    safe = np.where(r2 > 0, r2, 1.0)
    weights = op.weights[None, :] * 0.5 * np.log(safe)
    kress = circulant(kress_log_weights(op.n))
    s = 2 * np.pi * np.arange(op.n) / op.n
    gap = 4 * np.sin(0.5 * (s[:, None] - s[None, :])) ** 2
    np.fill_diagonal(gap, 1.0)
    for sl in op.loop_slices:
        speed = op.speed[sl]
        ratio = np.log(safe[sl, sl] / gap)
        np.fill_diagonal(ratio, np.log(speed ** 2))
        weights[sl, sl] = 0.5 * kress * speed[None, :] + 0.5 * op.step * speed[None, :] * ratio
    return weights


def _moments(op, targets, on_boundary, gradient):
    """Log-kernel moments I0, I1, I2 (and J0, J1, J2 for the gradient) over Omega."""
    log_w = _log_weights(op, targets, on_boundary)
    plain = op.weights[None, :]
    nu = op.normals[None, :, :]
    rel = op.nodes[None, :, :] - targets[:, None, :]
    r2 = (rel ** 2).sum(axis=-1)
    wn = (rel * nu).sum(axis=-1)
    eye = np.eye(2)

    I0 = (log_w * wn / 2).sum(axis=1) + (plain * -wn / 4).sum(axis=1)
    I1 = (
        np.einsum('tj,tjk->tk', log_w, nu * r2[..., None] / 8 + rel * wn[..., None] / 4)
        + np.einsum('tj,tjk->tk', plain, -3 * nu * r2[..., None] / 32 - rel * wn[..., None] / 16)
    )
    sym = np.einsum('tjk,tjl->tjkl', nu, rel)
    sym = (sym + sym.transpose(0, 1, 3, 2)) * r2[..., None, None]
    outer = np.einsum('tjk,tjl->tjkl', rel, rel) * wn[..., None, None]
    diag = eye[None, None] * (wn * r2)[..., None, None]
    I2 = (
        np.einsum('tj,tjkl->tkl', log_w, sym / 12 + outer / 6 - diag / 24)
        + np.einsum('tj,tjkl->tkl', plain, -sym / 18 - outer / 36 + diag * 11 / 288)
    )
    if not gradient:
        return I0, I1, I2
    J0 = -np.einsum('tj,tjm->tm', log_w, nu)
    J1 = -np.einsum('tj,tjk,tjm->tmk', log_w, rel, nu) + eye[None] * I0[:, None, None]
    J2 = (
        -np.einsum('tj,tjk,tjl,tjm->tmkl', log_w, rel, rel, nu)
        + np.einsum('mk,tl->tmkl', eye, I1)
        + np.einsum('ml,tk->tmkl', eye, I1)
    )
    return (I0, I1, I2), (J0, J1, J2)


class NewtonPotential:
    """N[f] for one source f, sampled once on the volume grid."""

    def __init__(self, op, f, grid=None):
        self.op = op
        self.f = f
        self.grid = grid or build_volume_grid(
            op.domain, angular_nodes=settings.ROBIN_VOLUME_ANGULAR_FACTOR * op.n
        )
        self.values = np.asarray(f(self.grid.points), dtype=float)
        if self.values.shape != (len(self.grid),) or not np.all(np.isfinite(self.values)):
            raise SolverError('Volume source must return one finite value per point')
        self.step = TAYLOR_STEP * op.domain.diameter

    def __repr__(self):
        return f'NewtonPotential(grid={self.grid!r})'

    def _evaluate(self, targets, centers, on_boundary, order):
        fx, grad, hess = _taylor_data(self.f, targets, centers, self.step)
        moments = _moments(self.op, targets, on_boundary, gradient=order >= 1)
        I0, I1, I2 = moments[0] if order >= 1 else moments
        value = fx * I0 + (grad * I1).sum(axis=1) + 0.5 * np.einsum('tkl,tkl->t', hess, I2)
        gradient = None
        if order >= 1:
            J0, J1, J2 = moments[1]
            gradient = (
                fx[:, None] * J0
                + np.einsum('tk,tmk->tm', grad, J1)
                + 0.5 * np.einsum('tkl,tmkl->tm', hess, J2)
            )

        points, weights = self.grid.points, self.grid.weights
        rows = max(1, CHUNK * 4096 // len(self.grid))
        for start in range(0, targets.shape[0], rows):
            block = slice(start, start + rows)
            rel = points[None, :, :] - targets[block, None, :]
            r2 = (rel ** 2).sum(axis=-1)
            remainder = (
                self.values[None, :] - fx[block, None]
                - np.einsum('tqa,ta->tq', rel, grad[block])
                - 0.5 * np.einsum('tqa,tab,tqb->tq', rel, hess[block], rel)
            )
            hit = r2 == 0
            safe = np.where(hit, 1.0, r2)
            log_r = np.where(hit, 0.0, 0.5 * np.log(safe))
            value[block] += (weights[None, :] * log_r * remainder).sum(axis=1)
            if order >= 1:
                kernel = np.where(hit[..., None], 0.0, -rel / safe[..., None])
                gradient[block] += np.einsum('q,tqm,tq->tm', weights, kernel, remainder)

        value /= 2 * np.pi
        if order == 0:
            return [value]
        return [value, gradient / (2 * np.pi)]

    def boundary_values(self):
        op = self.op
        centers = op.nodes - 2 * self.step * op.normals
        return self._evaluate(op.nodes, centers, on_boundary=True, order=0)[0]

    def evaluate(self, points, order=0):
        if order not in (0, 1):
            raise ValueError('Newton potentials are evaluated to order 1')
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self._evaluate(points, points, on_boundary=False, order=order)


def newton_potential(op, f, points, order=0, grid=None):
    """N[f] (and its gradient) at interior points."""
    return NewtonPotential(op, f, grid).evaluate(points, order)


class PoissonSolution:
    """u = N[f] + h; evaluable to order 1 at points outside the exclusion zone."""

    def __init__(self, op, potential, correction):
        self.op = op
        self.potential = potential
        self.correction = correction

    def __repr__(self):
        return f'PoissonSolution(source={"yes" if self.potential else "none"})'

    def evaluate(self, points, order=0):
        if order not in (0, 1):
            raise ValueError('Poisson solutions are evaluated to order 1')
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        points = np.atleast_2d(points)
        self.op.check_points(points, near='reject')
        tensors = self.correction.evaluate(points, order)
        if self.potential is not None:
            tensors = [a + b for a, b in zip(tensors, self.potential.evaluate(points, order))]
        if single:
            tensors = [tensor[0] for tensor in tensors]
        return tensors


def solve_poisson(op, f, g, grid=None):
    """
    Solve Delta u = f, u = g. ``f`` is a callable on (m, 2) points of the
    closed domain or None for f = 0; ``g`` is a callable or node values.
    """
    data = op.boundary_values(g)
    if f is None:
        return PoissonSolution(op, None, solve_dirichlet(op, data))
    potential = NewtonPotential(op, f, grid)
    correction = solve_dirichlet(op, data - potential.boundary_values())
    logger.debug('Poisson solve on %r with %r', op, potential.grid)
    return PoissonSolution(op, potential, correction)
