"""
Closed-form regular part, Green function and Robin function of a disk
(image charges), used as validation oracles.
"""

import numpy as np


def _unit(x, radius, center):
    return (np.asarray(x, dtype=float) - np.asarray(center, dtype=float)) / radius


def disk_regular_part(x, y, radius=1.0, center=(0.0, 0.0)):
    """H_y(x) = -1/2 ln(1 - 2 x.y + |x|^2 |y|^2) - ln R in unit-disk coordinates."""
    x, y = _unit(x, radius, center), _unit(y, radius, center)
    dot = (x * y).sum(axis=-1)
    return -0.5 * np.log(1 - 2 * dot + (x ** 2).sum(axis=-1) * (y ** 2).sum(axis=-1)) - np.log(radius)


def disk_green(x, y, radius=1.0, center=(0.0, 0.0)):
    distance = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    return (-np.log(distance) - disk_regular_part(x, y, radius, center)) / (2 * np.pi)


def disk_robin(x, radius=1.0, center=(0.0, 0.0)):
    """(t, grad t, Hess t) with t(x) = -ln(1 - |x|^2) - ln R."""
    x = _unit(x, radius, center)
    gap = 1 - (x ** 2).sum()
    value = -np.log(gap) - np.log(radius)
    gradient = 2 * x / gap / radius
    hessian = (2 * np.eye(2) / gap + 4 * np.outer(x, x) / gap ** 2) / radius ** 2
    return value, gradient, hessian
