"""
Geometry - deformed domains
Omega_theta = (I + theta) Omega, represented exactly through the base loops.
"""

import logging

import numpy as np
from django.conf import settings

from .curves import BoundaryCurve, ClosedLoop, FourierLoop, LoopSet, check_order
from .deformations import IDENTITY, norm_box
from .exceptions import CurveValidationError, DeformationError

logger = logging.getLogger(__name__)


class DeformedLoop(ClosedLoop):
    """c_theta(s) = c(s) + theta(c(s)), with s-derivatives by the chain rule."""

    def __init__(self, base, theta):
        self.base = base
        self.theta = theta

    def evaluate(self, s, order=0):
        check_order(order)
        s = np.asarray(s, dtype=float)
        base = self.base.evaluate(s.reshape(-1), order)
        field = self.theta.evaluate(base[0], order)
        out = [base[0] + field[0]]
        if order >= 1:
            b1 = base[1]
            out.append(b1 + np.einsum('mia,ma->mi', field[1], b1))
        if order >= 2:
            b2 = base[2]
            out.append(
                b2
                + np.einsum('miab,ma,mb->mi', field[2], b1, b1)
                + np.einsum('mia,ma->mi', field[1], b2)
            )
        if order >= 3:
            b3 = base[3]
            out.append(
                b3
                + np.einsum('miabc,ma,mb,mc->mi', field[3], b1, b1, b1)
                + 3 * np.einsum('miab,ma,mb->mi', field[2], b1, b2)
                + np.einsum('mia,ma->mi', field[1], b3)
            )
        return [tensor.reshape(s.shape + (2,)) for tensor in out]


class DeformedDomain(LoopSet):
    """The image (I + theta) Omega of a base domain (itself possibly deformed)."""

    def __init__(self, base, theta):
        self.base = base
        self.theta = theta
        self.loops = tuple(DeformedLoop(loop, theta) for loop in base.loops)

    def __repr__(self):
        return f'DeformedDomain(base={self.base!r}, theta={self.theta!r})'

    def resampled(self, samples):
        """Fourier re-expansion of each image loop from ``samples`` equispaced points."""
        s = 2 * np.pi * np.arange(samples) / samples
        loops = [FourierLoop.from_samples(loop.evaluate(s)[0]) for loop in self.loops]
        return BoundaryCurve(loops[0], loops[1:], validate=False)

    def resampling_error(self, samples, check=None):
        """Max distance between the exact image and its resampled Fourier curve."""
        check = check or 4 * samples
        t = 2 * np.pi * (np.arange(check) + 0.5) / check
        curve = self.resampled(samples)
        return max(
            float(np.abs(exact.evaluate(t)[0] - approx.evaluate(t)[0]).max())
            for exact, approx in zip(self.loops, curve.loops)
        )


def deform_domain(domain, theta, grid=None):
    """
    Build Omega_theta, rejecting fields whose Jacobian determinant is not
    positive on the norm grid or whose image loops flip or self-intersect.
    """
    xmin, xmax, ymin, ymax = norm_box(domain)
    grid = grid or settings.ROBIN_NORM_GRID
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, grid), np.linspace(ymin, ymax, grid))
    jac = IDENTITY + theta.evaluate(np.column_stack([xs.ravel(), ys.ravel()]), order=1)[1]
    det = np.linalg.det(jac)
    if det.min() <= 0:
        raise DeformationError(f'det(I + theta\') reaches {det.min():.3e} on the test grid')

    image = DeformedDomain(domain, theta)
    before = np.sign(domain.signed_areas())
    after = np.sign(image.signed_areas())
    if np.any(before != after):
        raise DeformationError('Deformation reverses the orientation of a boundary loop')
    try:
        image.validate()
    except CurveValidationError as exc:
        raise DeformationError(f'Deformed boundary is invalid: {exc}') from exc
    logger.debug('Deformed domain built, min det %.4f', det.min())
    return image
