"""
Shape derivative of the regular part

For a deformation theta, the transported regular part is
    v~^theta_xi(x) = H^{Omega_theta}_{xi + theta(xi)}(x + theta(x)).
Its derivative u[theta] in theta solves Delta u = S, u = B (see sources.py),
and u = theta . grad v + h with h harmonic. The gradient field u_p[theta]
solves the x_p-differentiated problem with the true trace of d_p u as datum.
"""

import logging

import numpy as np

from geometry.deformations import (
    IDENTITY,
    ComposedField,
    DeformationField,
    inverse_jacobian,
    inverse_second_derivative,
    invert_deformation,
)
from geometry.domains import deform_domain
from greens_robin.services import coordinate_index, regular_part
from harmonic_solver.operators import build_solver, solve_dirichlet
from harmonic_solver.poisson import solve_poisson

from .sources import boundary_datum, boundary_datum_gradient, source_gradient, source_term

logger = logging.getLogger(__name__)

PDE_SOLVE = 'pde-solve'
GREEN_REPRESENTATION = 'green-representation'
DECOMPOSITION = 'decomposition'
FINITE_DIFFERENCE = 'finite-difference'

GATEAUX_METHODS = (PDE_SOLVE, DECOMPOSITION, FINITE_DIFFERENCE)


def _is_zero(theta):
    return theta is None or getattr(theta, 'is_zero', False)


def _points(x):
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


class ShapeDerivativeResult:
    """u[theta] or u_p[theta] as an evaluable field, or a Gateaux vector in ``value``."""

    def __init__(self, theta, pole, field, method, value=None, diagnostics=None):
        self.theta = theta
        self.pole = np.asarray(pole, dtype=float)
        self.field = field
        self.method = method
        self.value = value
        self.diagnostics = diagnostics or {}

    def __repr__(self):
        return f'ShapeDerivativeResult(method={self.method}, pole={self.pole.tolist()})'

    def evaluate(self, points, order=0):
        if self.field is None:
            raise ValueError(f'{self.method} results carry no evaluable field')
        return self.field.evaluate(points, order)

    def as_dict(self):
        return {
            'method': self.method,
            'pole': self.pole.tolist(),
            'value': None if self.value is None else np.asarray(self.value).tolist(),
            'diagnostics': self.diagnostics,
        }


class MaterialDecomposition:
    """u = theta . grad v + h on the domain of ``part``, evaluable to order 1 up to the boundary."""

    def __init__(self, part, theta):
        self.part = part
        self.theta = theta
        op = part.op
        grad_v = part.evaluate(op.nodes, order=1, near='collar')[1]
        transport = (theta.evaluate(op.nodes)[0] * grad_v).sum(axis=1)
        self.datum = boundary_datum(op.nodes, part.pole, theta)
        self.harmonic = solve_dirichlet(op, self.datum - transport)

    def __repr__(self):
        return f'MaterialDecomposition(pole={self.part.pole.tolist()})'

    def evaluate(self, points, order=0, near='reject'):
        if order not in (0, 1):
            raise ValueError('Material decompositions are evaluated to order 1')
        points, single = _points(points)
        v = self.part.evaluate(points, order + 1, near=near)
        field = self.theta.evaluate(points, order)
        h = self.harmonic.evaluate(points, order, near=near)
        out = [(field[0] * v[1]).sum(axis=1) + h[0]]
        if order == 1:
            out.append(
                np.einsum('mja,mj->ma', field[1], v[1])
                + np.einsum('mj,mja->ma', field[0], v[2])
                + h[1]
            )
        if single:
            out = [tensor[0] for tensor in out]
        return out


def _deformed_solver(domain, theta, n):
    image = domain if _is_zero(theta) else deform_domain(domain, theta)
    return build_solver(image, n)


def transported_regular_part(domain, theta, xi, x, n=None):
    """v~^theta_xi at x and its x-gradient (I + theta'(x))^T grad H(x + theta(x))."""
    op = _deformed_solver(domain, theta, n)
    points, single = _points(x)
    xi = np.asarray(xi, dtype=float)
    pole = xi + theta.evaluate(xi)[0]
    shift, jac = theta.evaluate(points, order=1)
    value, grad = regular_part(op, pole).evaluate(points + shift, order=1)
    gradient = np.einsum('mai,ma->mi', IDENTITY + jac, grad)
    if single:
        return value[0], gradient[0]
    return value, gradient


def transported_residual(domain, theta, xi, probes=None, n=None):
    """
    Max over probes of the transported operator
        sum_s sum_ij d_ij v~ (delta_is + gamma'_is)(delta_js + gamma'_js) + sum_i d_i v~ Lap gamma_i
    evaluated at z = x + theta(x), which vanishes for the exact v~.
    """
    op = _deformed_solver(domain, theta, n)
    xi = np.asarray(xi, dtype=float)
    pole = xi + theta.evaluate(xi)[0]
    part = regular_part(op, pole)

    if probes is None:
        margin = max(2 * op.near_radius, 0.1 * op.domain.inradius)
        z = op.domain.interior_grid(7, margin)
    else:
        x, _ = _points(probes)
        z = x + theta.evaluate(x)[0]
    x = z + invert_deformation(theta, z)

    v = part.evaluate(z, order=2)
    jet = theta.evaluate(x, order=2)
    jac = IDENTITY + jet[1]
    grad_t = np.einsum('mai,ma->mi', jac, v[1])
    hess_t = np.einsum('mai,mab,mbj->mij', jac, v[2], jac) + np.einsum('ma,maij->mij', v[1], jet[2])
    pull = IDENTITY + inverse_jacobian(theta, z)
    lap_gamma = np.einsum('miaa->mi', inverse_second_derivative(theta, z))
    residual = np.einsum('mij,mis,mjs->m', hess_t, pull, pull) + (grad_t * lap_gamma).sum(axis=1)
    worst = float(np.abs(residual).max())
    logger.debug('Transported residual %.3e over %d probes', worst, z.shape[0])
    return worst


def shape_derivative_regular_part(op, xi, theta, grid=None):
    """u[theta]: Poisson solve with source S and datum B on the domain of ``op``."""
    xi = np.asarray(xi, dtype=float)
    part = regular_part(op, xi)
    datum = boundary_datum(op.nodes, xi, theta)

    def source(points):
        return source_term(part.evaluate(points, 2, near='collar'), theta.evaluate(points, 2))

    solution = solve_poisson(op, None if _is_zero(theta) else source, datum, grid)
    return ShapeDerivativeResult(
        theta, xi, solution, PDE_SOLVE, diagnostics={'datum_max': float(np.abs(datum).max())},
    )


def shape_derivative_gradient(op, xi, theta, p, datum='trace', grid=None):
    """
    u_p[theta] for p in {1, 2}: Delta u_p = d_p S with the boundary trace of d_p u.
    datum='printed' uses d_p B of the extended datum formula instead.
    """
    component = coordinate_index(p)
    xi = np.asarray(xi, dtype=float)
    part = regular_part(op, xi)
    if datum == 'trace':
        values = MaterialDecomposition(part, theta).evaluate(op.nodes, order=1, near='collar')[1][:, component]
    elif datum == 'printed':
        values = boundary_datum_gradient(op.nodes, xi, theta, component)
    else:
        raise ValueError(f'Unknown gradient datum {datum!r}')

    def source(points):
        return source_gradient(part.evaluate(points, 3, near='collar'), theta.evaluate(points, 3), component)

    solution = solve_poisson(op, None if _is_zero(theta) else source, values, grid)
    return ShapeDerivativeResult(theta, xi, solution, PDE_SOLVE, diagnostics={'datum': datum, 'p': p})


def _F_transported(domain, x, theta, n):
    """F(x, theta) = grad_x v~^theta_x(x)."""
    return transported_regular_part(domain, theta, x, x, n)[1]


def gateaux_F(op, x_bar, theta_bar, theta, method=PDE_SOLVE, frame='base', step=1e-3, grid=None):
    """
    F'_theta(x_bar, theta_bar)[theta] = (I + theta_bar'(x_bar))^T grad w(eta_bar), where w
    is the shape derivative on Omega_theta_bar at eta_bar = x_bar + theta_bar(x_bar) along
    alpha = theta o (I + theta_bar)^{-1}. With frame='deformed', ``theta`` is alpha itself.
    """
    if method not in GATEAUX_METHODS:
        raise ValueError(f'Unknown Gateaux method {method!r}')
    if frame not in ('base', 'deformed'):
        raise ValueError(f'Unknown frame {frame!r}')
    theta_bar = theta_bar if theta_bar is not None else DeformationField.zero()
    x_bar = np.asarray(x_bar, dtype=float)

    if method == FINITE_DIFFERENCE:
        if frame != 'base':
            raise ValueError('Finite differences perturb the base frame')
        plus = _F_transported(op.domain, x_bar, theta_bar + theta.scaled(step), op.n)
        minus = _F_transported(op.domain, x_bar, theta_bar - theta.scaled(step), op.n)
        value = (plus - minus) / (2 * step)
        return ShapeDerivativeResult(theta, x_bar, None, method, value, {'step': step})

    if _is_zero(theta_bar):
        op_bar, eta_bar, jac = op, x_bar, IDENTITY
        alpha = theta
    else:
        op_bar = build_solver(deform_domain(op.domain, theta_bar), op.n)
        shift, bar_jac = theta_bar.evaluate(x_bar, order=1)
        eta_bar, jac = x_bar + shift, IDENTITY + bar_jac
        alpha = theta if frame == 'deformed' else ComposedField(theta, theta_bar)

    if method == PDE_SOLVE:
        field = shape_derivative_regular_part(op_bar, eta_bar, alpha, grid).field
        gradient = field.evaluate(eta_bar, order=1)[1]
    else:
        field = MaterialDecomposition(regular_part(op_bar, eta_bar), alpha)
        gradient = field.evaluate(eta_bar, order=1)[1]
    value = jac.T @ gradient
    logger.debug('Gateaux derivative (%s, %s frame): %s', method, frame, value)
    return ShapeDerivativeResult(alpha, eta_bar, field, method, value, {'frame': frame})
