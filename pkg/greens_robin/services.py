"""
Green and Robin functions

G(x, y) = (1 / 2 pi) [Gamma(x - y) - H_y(x)],  Gamma(d) = -ln|d|,
with H_y harmonic and equal to Gamma(. - y) on the boundary (Delta G = -delta_y).
The Robin function is the diagonal t(x) = H_x(x).
"""

import logging

import numpy as np

from harmonic_solver.exceptions import NearBoundaryError
from harmonic_solver.operators import solve_dirichlet, solve_dirichlet_batch

from .exceptions import CoincidentPointsError

logger = logging.getLogger(__name__)

# Robin jets are only taken this far (relative to the diameter) from the boundary
ROBIN_MARGIN = 0.05


def coordinate_index(p):
    if p not in (1, 2):
        raise ValueError(f'Pole derivative index must be 1 or 2, got {p}')
    return p - 1


def singular_part(x, y, order=0):
    """[-ln|x - y|, grad_x, hess_x, third_x]; derivatives in y follow by antisymmetry."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    r2 = (d ** 2).sum(axis=1)
    if np.any(r2 == 0):
        raise CoincidentPointsError('Singular part requested at coincident points')
    eye = np.eye(2)
    out = [-0.5 * np.log(r2)]
    if order >= 1:
        out.append(-d / r2[:, None])
    if order >= 2:
        out.append(
            -eye[None] / r2[:, None, None]
            + 2 * np.einsum('mi,mj->mij', d, d) / r2[:, None, None] ** 2
        )
    if order >= 3:
        sym = (
            np.einsum('ij,mk->mijk', eye, d)
            + np.einsum('ik,mj->mijk', eye, d)
            + np.einsum('jk,mi->mijk', eye, d)
        )
        out.append(
            2 * sym / r2[:, None, None, None] ** 2
            - 8 * np.einsum('mi,mj,mk->mijk', d, d, d) / r2[:, None, None, None] ** 3
        )
    if single:
        out = [tensor[0] for tensor in out]
    return out


def _trace_data(nodes, y):
    """Boundary traces of Gamma(. - y) and of its y_1, y_2 derivatives, as columns."""
    d = nodes - y
    r2 = (d ** 2).sum(axis=1)
    return np.column_stack([-0.5 * np.log(r2), d / r2[:, None]])


class RegularPart:
    """A harmonic field attached to a pole: H_y, or dH_y/dy_p when ``component`` is set."""

    def __init__(self, op, pole, density, component=None):
        self.op = op
        self.pole = np.asarray(pole, dtype=float)
        self.density = density
        self.component = component

    def __repr__(self):
        kind = 'H' if self.component is None else f'dH/dy{self.component + 1}'
        return f'RegularPart({kind}, pole={self.pole.tolist()})'

    def evaluate(self, x, order=0, near='reject'):
        return self.density.evaluate(x, order, near=near)


def regular_part(op, y):
    """H_y on the domain of ``op``."""
    y = np.asarray(y, dtype=float)
    op.check_points(y[None, :], near='reject')
    density = solve_dirichlet(op, _trace_data(op.nodes, y)[:, 0])
    return RegularPart(op, y, density)


def pole_derivative_part(op, y, p):
    """dH_y/dy_p: the harmonic field with boundary data (x_p - y_p) / |x - y|^2."""
    component = coordinate_index(p)
    y = np.asarray(y, dtype=float)
    op.check_points(y[None, :], near='reject')
    density = solve_dirichlet(op, _trace_data(op.nodes, y)[:, 1 + component])
    return RegularPart(op, y, density, component)


def green_values(op, y, x, near='reject'):
    """G(x_i, y) for points x (m, 2); near='collar' admits points up to the boundary."""
    y = np.asarray(y, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(np.all(x == y, axis=1)):
        raise CoincidentPointsError(f'Green function requested at the pole {y.tolist()}')
    part = regular_part(op, y)
    regular = part.evaluate(x, near=near)[0]
    return (singular_part(x, y)[0] - regular) / (2 * np.pi)


def green_function(op, x, y):
    return float(green_values(op, y, np.asarray(x, dtype=float)[None, :])[0])


def strip_points(op, tau, layers=8):
    """Points at depths (k / layers) tau, k = 1..layers, behind every boundary node."""
    depths = tau * np.arange(1, layers + 1) / layers
    return (op.nodes[None, :, :] - depths[:, None, None] * op.normals[None, :, :]).reshape(-1, 2)


def green_strip_maximum(op, y, tau, layers=8):
    """max |G(., y)| over the boundary strip of width tau."""
    return float(np.abs(green_values(op, y, strip_points(op, tau, layers), near='collar')).max())


class RobinJet:
    """t(x), grad t(x), Hess t(x) with solver diagnostics."""

    def __init__(self, point, value, gradient, hessian, diagnostics):
        self.point = np.asarray(point, dtype=float)
        self.value = float(value)
        self.gradient = gradient
        self.hessian = hessian
        self.diagnostics = diagnostics

    def __repr__(self):
        return f'RobinJet(x={self.point.tolist()}, t={self.value:.6g})'

    def as_row(self):
        return {
            'x1': self.point[0],
            'x2': self.point[1],
            't': self.value,
            'dt1': self.gradient[0],
            'dt2': self.gradient[1],
            'h11': self.hessian[0, 0],
            'h12': self.hessian[0, 1],
            'h22': self.hessian[1, 1],
            'residual': self.diagnostics['residual'],
        }


def check_robin_point(op, x):
    margin = max(op.near_radius, ROBIN_MARGIN * op.domain.diameter)
    dist = op.check_points(np.atleast_2d(x), near='reject')[0]
    if dist <= margin:
        raise NearBoundaryError(
            f'Robin function requested {dist:.3e} from the boundary (margin {margin:.3e})',
            distance=float(dist),
            radius=margin,
        )


def robin_jet(op, x):
    """
    t = H_x(x), grad t = 2 grad_x H, Hess t = 2 H_xx + M + M^T where
    M[i, p] = d/dx_i dH/dy_p is read from the pole-derivative solves.
    """
    x = np.asarray(x, dtype=float)
    check_robin_point(op, x)
    data = _trace_data(op.nodes, x)
    regular, *pole_fields = solve_dirichlet_batch(op, data)

    value, grad, hess = regular.evaluate(x, order=2)
    mixed = np.column_stack([field.evaluate(x, order=1)[1] for field in pole_fields])
    hessian = 2 * hess + mixed + mixed.T

    rhs = np.zeros((op.size, 3))
    rhs[:op.total_nodes] = data
    solution = np.column_stack(
        [np.concatenate([d.values, d.hole_strengths]) for d in (regular, *pole_fields)]
    )
    residual = float(np.abs(op.matrix @ solution - rhs).max())
    diagnostics = {
        'residual': residual,
        'mixed_asymmetry': float(np.abs(mixed - mixed.T).max()),
        'literal_hessian_delta': float(np.abs(hessian - 4 * hess).max()),
    }
    return RobinJet(x, value, 2 * grad, hessian, diagnostics)


def robin_value(op, x):
    x = np.asarray(x, dtype=float)
    check_robin_point(op, x)
    return float(regular_part(op, x).evaluate(x)[0])
