"""
Shape derivative - surjectivity construction

For q in {1, 2} the field alpha^(q) = |eta - eta_bar|^2 chi(d(eta)^a) e_q, with d the
distance to the boundary and chi a smoothstep cutoff equal to 1 on (0, rho_bar]
and 0 from 2 rho_bar on. Row q of the surjectivity matrix is the gradient at
eta_bar of the shape derivative w[alpha^(q)] with pole eta_bar, computed

    (a) by the representation: delta_pq sigma0 + sigma^(q)_p, where sigma0 is the
        flux of dG/dnu(., eta_bar) and sigma^(q)_p = -int d_p S G(., eta_bar)
        over the boundary strip carrying alpha^(q);
    (b) directly, from the Poisson solve for w[alpha^(q)].
"""

import logging

import numpy as np
from django.conf import settings
from joblib import Parallel, delayed
from numpy.polynomial import Polynomial

from geometry.curves import cross, loop_frame
from geometry.deformations import product_jet, radial_chain_jet, scalar_to_vector
from greens_robin.services import regular_part, singular_part
from harmonic_solver.operators import harmonic_measure_density

from .exceptions import ClearanceError, ExponentError, StripQuadratureError
from .services import shape_derivative_regular_part
from .sources import source_gradient

logger = logging.getLogger(__name__)

SMOOTHSTEPS = {
    'quintic': Polynomial([0, 0, 0, 10, -15, 6]),
    'septic': Polynomial([0, 0, 0, 0, 35, -84, 70, -20]),
}

# Representation and direct rows further apart than this flag the report
METHOD_TOLERANCE = 5e-2

# Smallest admissible 1 - kappa d over the strip
REACH_MARGIN = 0.1


def cutoff_jet(s, rho_bar, kind='quintic'):
    """[chi, chi', chi'', chi'''] at s; the transition runs over (rho_bar, 2 rho_bar)."""
    step = SMOOTHSTEPS[kind]
    s = np.asarray(s, dtype=float)
    u = np.clip((s - rho_bar) / rho_bar, 0.0, 1.0)
    transition = (s > rho_bar) & (s < 2 * rho_bar)
    out = [1.0 - step(u)]
    for k in range(1, 4):
        out.append(np.where(transition, -step.deriv(k)(u) / rho_bar ** k, 0.0))
    return out


def distance_jet(domain, points, closest=None):
    """
    [d, grad d, hess d, third d] of the signed boundary distance at points
    off the medial axis, from the closest-point parametrization:
    grad d = -nu, hess d = -K tau tau^T with K = kappa / (1 - kappa d).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    closest = closest if closest is not None else domain.closest_points(points)
    depth = closest['distance']
    m = depth.size
    grad = np.empty((m, 2))
    hess = np.empty((m, 2, 2))
    third = np.empty((m, 2, 2, 2))
    for index, loop in enumerate(domain.loops):
        sel = closest['loop'] == index
        if not sel.any():
            continue
        _, d1, d2, d3 = loop.evaluate(closest['s'][sel], order=3)
        speed = np.hypot(d1[:, 0], d1[:, 1])
        tau = d1 / speed[:, None]
        nu = np.stack([tau[:, 1], -tau[:, 0]], axis=-1)
        kappa = cross(d1, d2) / speed ** 3
        kappa_s = cross(d1, d3) / speed ** 3 - 3 * cross(d1, d2) * (d1 * d2).sum(axis=1) / speed ** 5
        scale = 1.0 - kappa * depth[sel]
        K = kappa / scale
        ds = tau / (speed * scale)[:, None]
        dK = (kappa_s[:, None] * ds - (kappa ** 2)[:, None] * nu) / (scale ** 2)[:, None]
        dtau = -(kappa * speed)[:, None, None] * nu[:, :, None] * ds[:, None, :]
        grad[sel] = -nu
        hess[sel] = -K[:, None, None] * np.einsum('mi,mj->mij', tau, tau)
        third[sel] = (
            -np.einsum('mk,mi,mj->mijk', dK, tau, tau)
            - K[:, None, None, None] * (
                np.einsum('mik,mj->mijk', dtau, tau) + np.einsum('mi,mjk->mijk', tau, dtau)
            )
        )
    return [depth, grad, hess, third]


class SurjectivityField:
    """alpha^(q); derivatives to order 3, with the transition zone handled by distance jets."""

    def __init__(self, domain, q, center, rho_bar, exponent, cutoff):
        self.domain = domain
        self.q = q
        self.center = np.asarray(center, dtype=float)
        self.rho_bar = float(rho_bar)
        self.exponent = exponent
        self.cutoff = cutoff

    def __repr__(self):
        return (
            f'SurjectivityField(q={self.q}, center={self.center.tolist()}, '
            f'rho_bar={self.rho_bar}, a={self.exponent}, {self.cutoff})'
        )

    def cutoff_composite(self, points, order=3):
        """Scalar jet of chi(d^a) at points (m, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        a = self.exponent
        closest = self.domain.closest_points(points)
        depth = np.clip(closest['distance'], 0.0, None)
        s = depth ** a
        chi = cutoff_jet(s, self.rho_bar, self.cutoff)
        jet = [chi[0]] + [np.zeros((m,) + (2,) * k) for k in range(1, order + 1)]
        transition = (s > self.rho_bar) & (s < 2 * self.rho_bar)
        if order == 0 or not transition.any():
            return jet

        subset = {key: value[transition] for key, value in closest.items()}
        d = depth[transition]
        g1 = a * d ** (a - 1)
        g2 = a * (a - 1) * d ** (a - 2)
        g3 = a * (a - 1) * (a - 2) * d ** (a - 3)
        c1, c2, c3 = (derivative[transition] for derivative in chi[1:])
        derivs = (
            c1 * g1,
            c2 * g1 ** 2 + c1 * g2,
            c3 * g1 ** 3 + 3 * c2 * g1 * g2 + c1 * g3,
        )
        parts = radial_chain_jet(distance_jet(self.domain, points[transition], subset), derivs, order)
        for k, tensor in enumerate(parts, start=1):
            jet[k][transition] = tensor
        return jet

    def evaluate(self, eta, order=0):
        eta = np.asarray(eta, dtype=float)
        single = eta.ndim == 1
        points = np.atleast_2d(eta)
        m = points.shape[0]
        rel = points - self.center
        quadratic = [
            (rel ** 2).sum(axis=1),
            2 * rel,
            np.broadcast_to(2 * np.eye(2), (m, 2, 2)),
            np.zeros((m, 2, 2, 2)),
        ]
        scalar = product_jet(quadratic, self.cutoff_composite(points, order), order)
        out = scalar_to_vector(scalar, self.q - 1)
        if single:
            out = [tensor[0] for tensor in out]
        return out

    def bound(self, points, p):
        """|d_q c| + |d_q d_p c| + |Lap c| + |d_p Lap c| for c = chi(d^a)."""
        _, grad, hess, third = self.cutoff_composite(points, order=3)
        q, p = self.q - 1, p - 1
        return (
            np.abs(grad[:, q])
            + np.abs(hess[:, q, p])
            + np.abs(np.einsum('maa->m', hess))
            + np.abs(np.einsum('maab->mb', third)[:, p])
        )


def build_surjectivity_field(domain, q, center, rho_bar, exponent=None, cutoff=None, allow_small_exponent=False):
    """alpha^(q) on ``domain``; rejects 4 rho_bar > dist(center) and exponents below 4."""
    exponent = exponent or settings.ROBIN_SURJECTIVITY_EXPONENT
    cutoff = cutoff or settings.ROBIN_CUTOFF
    if q not in (1, 2):
        raise ValueError(f'Field index q must be 1 or 2, got {q}')
    if cutoff not in SMOOTHSTEPS:
        raise ValueError(f'Unknown cutoff {cutoff!r}; expected one of {sorted(SMOOTHSTEPS)}')
    if exponent < 4 and not allow_small_exponent:
        raise ExponentError(f'Cutoff exponent {exponent} is below 4')
    if rho_bar <= 0:
        raise ValueError('Cutoff radius must be positive')
    center = np.asarray(center, dtype=float)
    dist = float(domain.signed_distance(center[None, :])[0])
    if 4 * rho_bar > dist:
        raise ClearanceError(
            f'rho_bar = {rho_bar} violates 4 rho_bar <= {dist:.4f}; admissible range (0, {dist / 4:.4f}]',
            admissible=(0.0, max(dist, 0.0) / 4),
        )
    return SurjectivityField(domain, q, center, rho_bar, exponent, cutoff)


def sigma0(op, center):
    """Flux of dG/dnu(., center) through the whole boundary; -1 for Delta G = -delta."""
    return float(np.dot(harmonic_measure_density(op, center), op.weights))


class StripQuadrature:
    """(parameter x depth) quadrature of the strip inner <= d <= outer behind every loop."""

    def __init__(self, points, weights, depth, inner, outer, perimeter):
        self.points = points
        self.weights = weights
        self.depth = depth
        self.inner = inner
        self.outer = outer
        self.perimeter = perimeter

    def __repr__(self):
        return f'StripQuadrature(points={self.weights.size}, depth=[{self.inner:.4f}, {self.outer:.4f}])'

    @property
    def innermost(self):
        return self.depth == self.depth.min()


def build_strip(op, rho_bar, exponent, radial_nodes=None, angular_nodes=None):
    """
    Gauss-Legendre in depth over [inner, rho_bar^(1/a)] and [rho_bar^(1/a), (2 rho_bar)^(1/a)],
    trapezoid in the loop parameter, with inner = max(delta_near, rho_bar / 10).
    """
    radial_nodes = radial_nodes or settings.ROBIN_STRIP_RADIAL_NODES
    angular_nodes = angular_nodes or 2 * op.n
    inner = max(op.near_radius, rho_bar / 10)
    middle = rho_bar ** (1.0 / exponent)
    outer = (2 * rho_bar) ** (1.0 / exponent)
    if inner >= middle:
        raise StripQuadratureError(
            f'Strip inner depth {inner:.4f} reaches the cutoff plateau edge {middle:.4f}; refine the solver'
        )

    x, w = np.polynomial.legendre.leggauss(radial_nodes)
    depths, depth_weights = [], []
    for lo, hi in ((inner, middle), (middle, outer)):
        depths.append(lo + 0.5 * (hi - lo) * (x + 1))
        depth_weights.append(0.5 * (hi - lo) * w)
    depths = np.concatenate(depths)
    depth_weights = np.concatenate(depth_weights)

    s = 2 * np.pi * np.arange(angular_nodes) / angular_nodes
    ds = 2 * np.pi / angular_nodes
    points, weights, depth = [], [], []
    perimeter = 0.0
    for index, loop in enumerate(op.domain.loops):
        frame = loop_frame(loop, s)
        reach = 1.0 - frame['curvature'] * outer
        if reach.min() < REACH_MARGIN:
            raise StripQuadratureError(
                f'Strip depth {outer:.4f} exceeds the reach of loop {index} (1 - kappa d = {reach.min():.3f})'
            )
        points.append(frame['points'][None] - depths[:, None, None] * frame['normal'][None])
        weights.append(
            depth_weights[:, None] * ds * frame['speed'][None]
            * (1.0 - frame['curvature'][None] * depths[:, None])
        )
        depth.append(np.broadcast_to(depths[:, None], weights[-1].shape))
        perimeter += float(frame['speed'].sum() * ds)

    points = np.concatenate([block.reshape(-1, 2) for block in points])
    weights = np.concatenate([block.ravel() for block in weights])
    depth = np.concatenate([block.ravel() for block in depth])
    mismatch = np.abs(op.domain.signed_distance(points) - depth).max()
    if mismatch > 1e-6 * op.domain.diameter:
        raise StripQuadratureError(
            f'Strip points are {mismatch:.3e} off their nominal depth; strips of different loops overlap'
        )
    return StripQuadrature(points, weights, depth, inner, outer, perimeter)


class SigmaEstimate:

    def __init__(self, q, p, value, bound, collar_bound):
        self.q = q
        self.p = p
        self.value = float(value)
        self.bound = float(bound)
        self.collar_bound = float(collar_bound)

    def __repr__(self):
        return f'SigmaEstimate(q={self.q}, p={self.p}, value={self.value:.3e})'


def _strip_estimates(op, center, fields, strip):
    """sigma^(q)_p for every field and p, sharing the v and G samples on the strip."""
    part = regular_part(op, center)
    v = part.evaluate(strip.points, order=3, near='collar')
    green = (singular_part(strip.points, center)[0] - v[0]) / (2 * np.pi)
    inner = strip.innermost
    estimates = {}
    for field in fields:
        jet = field.evaluate(strip.points, order=3)
        for p in (1, 2):
            derivative = source_gradient(v, jet, p - 1)
            collar_bound = (
                np.abs(derivative[inner]).max() * np.abs(green[inner]).max() * strip.perimeter * strip.inner
            )
            estimates[field.q, p] = SigmaEstimate(
                field.q, p,
                -np.dot(strip.weights, derivative * green),
                field.bound(strip.points, p).max(),
                collar_bound,
            )
    return estimates


def sigma_estimate(op, q, p, center, rho_bar, exponent=None, cutoff=None, allow_small_exponent=False):
    """sigma^(q)_p(rho_bar) with its max A_p over the strip and the neglected-collar bound."""
    if p not in (1, 2):
        raise ValueError(f'Gradient index p must be 1 or 2, got {p}')
    field = build_surjectivity_field(op.domain, q, center, rho_bar, exponent, cutoff, allow_small_exponent)
    strip = build_strip(op, rho_bar, field.exponent)
    return _strip_estimates(op, field.center, [field], strip)[q, p]


class SurjectivityReport:
    """Both 2 x 2 matrices of a surjectivity run; ``matrix`` is the representation one."""

    def __init__(self, center, rho_bar, exponent, cutoff, sigma_zero, estimates, direct):
        self.center = np.asarray(center, dtype=float)
        self.rho_bar = rho_bar
        self.exponent = exponent
        self.cutoff = cutoff
        self.sigma0 = sigma_zero
        self.estimates = estimates
        self.sigmas = np.array([[estimates[q, p].value for p in (1, 2)] for q in (1, 2)])
        self.matrix = sigma_zero * np.eye(2) + self.sigmas
        self.direct = np.asarray(direct, dtype=float)
        self.smin = float(np.linalg.svd(self.matrix, compute_uv=False).min())
        self.direct_smin = float(np.linalg.svd(self.direct, compute_uv=False).min())
        self.method_delta = float(
            np.abs(self.matrix - self.direct).max() / max(1.0, np.abs(self.direct).max())
        )
        self.collar_bound = max(estimate.collar_bound for estimate in estimates.values())
        self.bounds = np.array([[estimates[q, p].bound for p in (1, 2)] for q in (1, 2)])

    def __repr__(self):
        return f'SurjectivityReport(rho_bar={self.rho_bar}, smin={self.smin:.4f})'

    @property
    def flagged(self):
        return self.method_delta > METHOD_TOLERANCE

    @property
    def off_diagonal(self):
        return float(max(abs(self.matrix[0, 1]), abs(self.matrix[1, 0])))

    def as_dict(self):
        return {
            'sigma0': self.sigma0,
            'rows': self.matrix.tolist(),
            'direct_rows': self.direct.tolist(),
            'smin': self.smin,
            'direct_smin': self.direct_smin,
            'rho_bar': self.rho_bar,
            'a': self.exponent,
            'cutoff': self.cutoff,
            'method_delta': self.method_delta,
            'collar_bound': self.collar_bound,
            'a_bounds': self.bounds.tolist(),
            'flagged': self.flagged,
        }


def _direct_row(op, center, field, grid):
    return shape_derivative_regular_part(op, center, field, grid).evaluate(center, order=1)[1]


def surjectivity_matrix(op, center, rho_bar, exponent=None, cutoff=None, allow_small_exponent=False,
                        workers=None, grid=None):
    """Rows q = 1, 2 of grad w[alpha^(q)](center), by representation and by direct solve."""
    workers = workers or settings.ROBIN_WORKERS
    center = np.asarray(center, dtype=float)
    fields = [
        build_surjectivity_field(op.domain, q, center, rho_bar, exponent, cutoff, allow_small_exponent)
        for q in (1, 2)
    ]
    exponent, cutoff = fields[0].exponent, fields[0].cutoff
    sigma_zero = sigma0(op, center)
    estimates = _strip_estimates(op, center, fields, build_strip(op, rho_bar, exponent))
    direct = Parallel(n_jobs=workers, prefer='threads')(
        delayed(_direct_row)(op, center, field, grid) for field in fields
    )
    report = SurjectivityReport(center, rho_bar, exponent, cutoff, sigma_zero, estimates, direct)
    if report.flagged:
        logger.warning(
            'Representation and direct rows differ by %.3e at rho_bar=%s', report.method_delta, rho_bar,
        )
    logger.info('Surjectivity rho_bar=%s a=%s: smin %.4f', rho_bar, exponent, report.smin)
    return report
