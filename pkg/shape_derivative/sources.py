"""
Shape derivative - source terms and boundary data

For a harmonic v (the regular part with pole xi) and a field theta:

    S      = 2 sum_ij d_ij v d_i theta_j + sum_j d_j v Lap theta_j
    d_p S  = its x_p derivative
    B      = -sum_i (x_i - xi_i) / |x - xi|^2 (theta_i(x) - theta_i(xi))

S equals Lap(theta . grad v), so u = theta . grad v + h with h harmonic.
Jets of theta follow the geometry layout jac[m, j, i] = d_i theta_j.
"""

import numpy as np


def source_term(v_jet, theta_jet):
    grad_v, hess_v = v_jet[1], v_jet[2]
    jac, hess = theta_jet[1], theta_jet[2]
    laplacian = np.einsum('mjaa->mj', hess)
    return 2 * np.einsum('mij,mji->m', hess_v, jac) + np.einsum('mj,mj->m', grad_v, laplacian)


def source_gradient(v_jet, theta_jet, p):
    """d_p S for a 0-based coordinate index p."""
    grad_v, hess_v, third_v = v_jet[1], v_jet[2], v_jet[3]
    jac, hess, third = theta_jet[1], theta_jet[2], theta_jet[3]
    laplacian = np.einsum('mjaa->mj', hess)
    laplacian_p = np.einsum('mjaa->mj', third[..., p])
    return (
        2 * np.einsum('mij,mji->m', third_v[:, p], jac)
        + 2 * np.einsum('mij,mji->m', hess_v, hess[..., p])
        + np.einsum('mj,mj->m', hess_v[:, p], laplacian)
        + np.einsum('mj,mj->m', grad_v, laplacian_p)
    )


def boundary_datum(points, pole, theta):
    d = points - pole
    r2 = (d ** 2).sum(axis=1)
    shift = theta.evaluate(points)[0] - theta.evaluate(pole[None, :])[0]
    return -(d * shift).sum(axis=1) / r2


def boundary_datum_gradient(points, pole, theta, p):
    """x_p derivative of the datum formula extended off the boundary."""
    d = points - pole
    r2 = (d ** 2).sum(axis=1)
    value, jac = theta.evaluate(points, order=1)
    shift = value - theta.evaluate(pole[None, :])[0]
    kernel_p = np.eye(2)[p][None, :] / r2[:, None] - 2 * d * d[:, p:p + 1] / r2[:, None] ** 2
    return -(kernel_p * shift).sum(axis=1) - (d * jac[:, :, p]).sum(axis=1) / r2
