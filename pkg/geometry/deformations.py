"""
Geometry - deformation fields
Finite combinations of smooth basis fields with closed-form derivatives to
order 3, the sampled C^3 norm, and the inverse perturbation gamma with
(I + gamma) = (I + theta)^{-1}.

Derivative tensors use the layout value[m, i], jac[m, i, a] = d_a theta_i,
hess[m, i, a, b], third[m, i, a, b, c].
"""

import itertools
import logging

import numpy as np
from django.conf import settings

from .curves import MAX_ORDER, check_order
from .exceptions import (
    DerivativeOrderError,
    GeometrySpecError,
    NonContractiveDeformationError,
    SingularJacobianError,
)

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2)


def _as_points(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def _zero_jet(m, order, leading=(2,)):
    return [np.zeros((m,) + leading + (2,) * k) for k in range(order + 1)]


def scalar_to_vector(jet, component):
    """Embed a scalar jet as component ``component`` of a vector field."""
    out = []
    for k, tensor in enumerate(jet):
        full = np.zeros((tensor.shape[0], 2) + (2,) * k)
        full[:, component] = tensor
        out.append(full)
    return out


def product_jet(f, g, order):
    """Leibniz rule for two scalar jets [value, grad, hess, third] over m points."""
    out = [f[0] * g[0]]
    if order >= 1:
        out.append(f[1] * g[0][:, None] + f[0][:, None] * g[1])
    if order >= 2:
        out.append(
            f[2] * g[0][:, None, None]
            + np.einsum('ma,mb->mab', f[1], g[1])
            + np.einsum('ma,mb->mab', g[1], f[1])
            + f[0][:, None, None] * g[2]
        )
    if order >= 3:
        third = f[3] * g[0][:, None, None, None] + f[0][:, None, None, None] * g[3]
        third = third + np.einsum('mab,mc->mabc', f[2], g[1])
        third = third + np.einsum('mac,mb->mabc', f[2], g[1])
        third = third + np.einsum('mbc,ma->mabc', f[2], g[1])
        third = third + np.einsum('mab,mc->mabc', g[2], f[1])
        third = third + np.einsum('mac,mb->mabc', g[2], f[1])
        third = third + np.einsum('mbc,ma->mabc', g[2], f[1])
        out.append(third)
    return out


def radial_chain_jet(q_jet, derivs, order):
    """
    Jet of F(q(x)) for a scalar q with jet q_jet, given F', F'', F''' at q.
    q's third derivatives are taken from q_jet when present.
    """
    f1, f2, f3 = derivs
    q1 = q_jet[1]
    out = []
    if order >= 1:
        out.append(f1[:, None] * q1)
    if order >= 2:
        q2 = q_jet[2]
        out.append(f2[:, None, None] * np.einsum('ma,mb->mab', q1, q1) + f1[:, None, None] * q2)
    if order >= 3:
        q2 = q_jet[2]
        third = f3[:, None, None, None] * np.einsum('ma,mb,mc->mabc', q1, q1, q1)
        third = third + f2[:, None, None, None] * (
            np.einsum('mab,mc->mabc', q2, q1)
            + np.einsum('mac,mb->mabc', q2, q1)
            + np.einsum('mbc,ma->mabc', q2, q1)
        )
        if len(q_jet) > 3:
            third = third + f1[:, None, None, None] * q_jet[3]
        out.append(third)
    return out


class ConstantField:
    """theta = e_component."""

    kind = 'constant'

    def __init__(self, component):
        if component not in (0, 1):
            raise GeometrySpecError('Constant field component must be 0 or 1')
        self.component = component

    def jet(self, points, order):
        m = points.shape[0]
        out = _zero_jet(m, order)
        out[0][:, self.component] = 1.0
        return out

    def to_dict(self):
        return {'type': self.kind, 'component': self.component}


class LinearField:
    """theta(x) = A x; A = I is the dilation field."""

    kind = 'linear'

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float).reshape(2, 2)

    @classmethod
    def dilation(cls):
        return cls(IDENTITY)

    def jet(self, points, order):
        m = points.shape[0]
        out = _zero_jet(m, order)
        out[0] = points @ self.matrix.T
        if order >= 1:
            out[1][:] = self.matrix
        return out

    def to_dict(self):
        return {'type': self.kind, 'matrix': self.matrix.tolist()}


class TrigBumpField:
    """
    theta = e_component * T_x(kx w (x - cx)) T_y(ky w (y - cy)) * bump(|x - c| / R)
    where T is cos or sin per ``kinds`` (e.g. 'cs'), w = 2 pi / wavelength and
    bump(r) = exp(1 - 1 / (1 - r^2)) for r < 1, else 0.
    """

    kind = 'trig_bump'

    def __init__(self, component, modes=(0, 0), kinds='cc', center=(0.0, 0.0), radius=1.0, wavelength=2.0):
        if component not in (0, 1):
            raise GeometrySpecError('Trig-bump component must be 0 or 1')
        if len(kinds) != 2 or set(kinds) - {'c', 's'}:
            raise GeometrySpecError(f'Trig-bump kinds must be two of c/s, got {kinds!r}')
        if radius <= 0 or wavelength <= 0:
            raise GeometrySpecError('Trig-bump radius and wavelength must be positive')
        self.component = component
        self.modes = tuple(int(k) for k in modes)
        self.kinds = kinds
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.wavelength = float(wavelength)

    def _factor_derivs(self, u, k, kind, order):
        freq = k * 2 * np.pi / self.wavelength
        base = np.cos if kind == 'c' else np.sin
        return [freq ** j * base(freq * u + j * np.pi / 2) for j in range(order + 1)]

    def _trig_jet(self, points, order):
        rel = points - self.center
        fx = self._factor_derivs(rel[:, 0], self.modes[0], self.kinds[0], order)
        fy = self._factor_derivs(rel[:, 1], self.modes[1], self.kinds[1], order)
        jet = [fx[0] * fy[0]]
        for k in range(1, order + 1):
            tensor = np.empty((points.shape[0],) + (2,) * k)
            for index in itertools.product((0, 1), repeat=k):
                ny = sum(index)
                tensor[(slice(None),) + index] = fx[k - ny] * fy[ny]
            jet.append(tensor)
        return jet

    def _bump_jet(self, points, order):
        rel = points - self.center
        r2 = self.radius ** 2
        q = (rel ** 2).sum(axis=1) / r2
        inside = q < 0.999
        w = np.where(inside, 1.0 / (1.0 - np.where(inside, q, 0.0)), 0.0)
        value = np.where(inside, np.exp(1.0 - w), 0.0)
        h1 = -w ** 2
        h2 = -2 * w ** 3
        h3 = -6 * w ** 4
        b1 = h1 * value
        b2 = (h2 + h1 ** 2) * value
        b3 = (h3 + 3 * h1 * h2 + h1 ** 3) * value
        m = points.shape[0]
        q_jet = [q, 2 * rel / r2, np.broadcast_to(2 * IDENTITY / r2, (m, 2, 2))]
        return [value] + radial_chain_jet(q_jet, (b1, b2, b3), order)

    def jet(self, points, order):
        scalar = product_jet(self._trig_jet(points, order), self._bump_jet(points, order), order)
        return scalar_to_vector(scalar, self.component)

    def to_dict(self):
        return {
            'type': self.kind,
            'component': self.component,
            'modes': list(self.modes),
            'kinds': self.kinds,
            'center': self.center.tolist(),
            'radius': self.radius,
            'wavelength': self.wavelength,
        }


BASIS_TYPES = {
    ConstantField.kind: ConstantField,
    LinearField.kind: LinearField,
    TrigBumpField.kind: TrigBumpField,
}


class DeformationField:
    """A finite linear combination sum_k coeffs[k] * basis[k]."""

    def __init__(self, basis=(), coeffs=()):
        self.basis = tuple(basis)
        self.coeffs = np.array(coeffs, dtype=float).reshape(-1)
        if self.coeffs.size != len(self.basis):
            raise GeometrySpecError(
                f'{len(self.basis)} basis fields but {self.coeffs.size} coefficients'
            )
        self.coeffs.flags.writeable = False

    def __repr__(self):
        return f'DeformationField(terms={len(self.basis)})'

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def single(cls, element, coefficient=1.0):
        return cls([element], [coefficient])

    @property
    def is_zero(self):
        return not np.any(self.coeffs)

    def evaluate(self, x, order=0):
        """[theta(x), theta'(x), ...] up to ``order``; a single point gives unbatched tensors."""
        check_order(order)
        points, single = _as_points(x)
        out = _zero_jet(points.shape[0], order)
        for element, coefficient in zip(self.basis, self.coeffs):
            if coefficient == 0.0:
                continue
            for k, tensor in enumerate(element.jet(points, order)):
                out[k] = out[k] + coefficient * tensor
        if single:
            out = [tensor[0] for tensor in out]
        return out

    def __add__(self, other):
        return DeformationField(self.basis + other.basis, np.concatenate([self.coeffs, other.coeffs]))

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, factor):
        return DeformationField(self.basis, factor * self.coeffs)

    def norm(self, box, grid=None, order=MAX_ORDER):
        """Sampled sup over the box of every partial derivative of order <= ``order``."""
        grid = grid or settings.ROBIN_NORM_GRID
        xmin, xmax, ymin, ymax = box
        xs, ys = np.meshgrid(np.linspace(xmin, xmax, grid), np.linspace(ymin, ymax, grid))
        points = np.column_stack([xs.ravel(), ys.ravel()])
        return max(float(np.abs(tensor).max()) for tensor in self.evaluate(points, order))

    def in_ball(self, rho, box, grid=None):
        return self.norm(box, grid) <= rho

    def to_dict(self):
        return {'basis': [element.to_dict() for element in self.basis], 'coeffs': self.coeffs.tolist()}


def norm_box(domain, padding=None):
    """Bounding box of the domain inflated by ``padding`` (settings default)."""
    padding = settings.ROBIN_NORM_PADDING if padding is None else padding
    return domain.bounding_box(padding)


def evaluate_deformation(theta, x, order=0):
    if order > MAX_ORDER:
        raise DerivativeOrderError(f'Deformation derivatives stop at order {MAX_ORDER}')
    return theta.evaluate(x, order)


def invert_deformation(theta, z, tol=None, max_iter=None):
    """
    gamma(z) with (I + theta)(z + gamma(z)) = z, by the fixed point
    gamma <- -theta(z + gamma).
    """
    tol = settings.ROBIN_FIXED_POINT_TOL if tol is None else tol
    max_iter = max_iter or settings.ROBIN_FIXED_POINT_MAX_ITER
    if tol <= 0:
        raise ValueError('Fixed-point tolerance must be positive')
    points, single = _as_points(z)
    gamma = np.zeros_like(points)
    previous = np.inf
    for iteration in range(1, max_iter + 1):
        updated = -theta.evaluate(points + gamma)[0]
        increment = float(np.abs(updated - gamma).max()) if gamma.size else 0.0
        gamma = updated
        if increment <= 0.5 * tol:
            return gamma[0] if single else gamma
        if not np.isfinite(increment) or (iteration > 5 and increment > 2 * previous):
            break
        previous = increment
    raise NonContractiveDeformationError(
        f'Inverse deformation did not converge after {iteration} iterations '
        f'(last increment {increment:.3e})',
        iterations=iteration,
        increment=increment,
    )


def _jacobian_at_preimage(theta, z, tol):
    points, single = _as_points(z)
    x = points + invert_deformation(theta, points, tol)
    jet = theta.evaluate(x, order=2)
    jac = IDENTITY + jet[1]
    det = np.linalg.det(jac)
    if np.any(np.abs(det) < 1e-12):
        raise SingularJacobianError('I + theta\' is singular at the preimage point')
    return x, jet, jac, single


def inverse_jacobian(theta, z, tol=None):
    """gamma'(z) = -[I + theta'(x)]^{-1} theta'(x) at x = z + gamma(z)."""
    _, jet, jac, single = _jacobian_at_preimage(theta, z, tol)
    result = -np.linalg.solve(jac, jet[1])
    return result[0] if single else result


def inverse_second_derivative(theta, z, tol=None):
    """
    gamma''(z)[j, a, b], from differentiating (I + theta)(z + gamma(z)) = z twice:
    (I + theta') gamma''[., a, b] = -theta''[P e_a, P e_b] with P = I + gamma'.
    """
    _, jet, jac, single = _jacobian_at_preimage(theta, z, tol)
    inverse = np.linalg.inv(jac)
    rhs = -np.einsum('mjcd,mca,mdb->mjab', jet[2], inverse, inverse)
    result = np.einsum('mij,mjab->miab', inverse, rhs)
    return result[0] if single else result


def neumann_inverse_jacobian(theta, z, terms=8, tol=None):
    """Partial sum of sum_{i>=0} (-1)^{i+1} theta'(x)^{i+1}."""
    _, jet, _, single = _jacobian_at_preimage(theta, z, tol)
    power = np.broadcast_to(IDENTITY, jet[1].shape).copy()
    total = np.zeros_like(power)
    for i in range(terms):
        power = np.einsum('mij,mjk->mik', power, jet[1])
        total += (-1) ** (i + 1) * power
    return total[0] if single else total


class ComposedField:
    """
    alpha = theta o (I + theta_bar)^{-1}, the base-frame field theta seen on
    the deformed domain. Derivatives are available to order 2.
    """

    def __init__(self, theta, theta_bar, tol=None):
        self.theta = theta
        self.theta_bar = theta_bar
        self.tol = tol

    def __repr__(self):
        return f'ComposedField({self.theta!r} o inverse of {self.theta_bar!r})'

    def evaluate(self, eta, order=0):
        if order > 2:
            raise DerivativeOrderError('Composed fields carry derivatives to order 2')
        points, single = _as_points(eta)
        x = points + invert_deformation(self.theta_bar, points, self.tol)
        inner = self.theta.evaluate(x, order)
        out = [inner[0]]
        if order >= 1:
            bar = self.theta_bar.evaluate(x, order)
            pull = np.linalg.inv(IDENTITY + bar[1])
            out.append(np.einsum('mic,mca->mia', inner[1], pull))
        if order >= 2:
            gamma2 = -np.einsum(
                'mij,mjcd,mca,mdb->miab', pull, bar[2], pull, pull
            )
            out.append(
                np.einsum('micd,mca,mdb->miab', inner[2], pull, pull)
                + np.einsum('mic,mcab->miab', inner[1], gamma2)
            )
        if single:
            out = [tensor[0] for tensor in out]
        return out
