"""
Harmonic solver - complex kernel sums

A harmonic u is written as Re F with F analytic; then
d^a/dx^a d^b/dy^b u = Re(i^b F^(a+b)), so derivatives of every order come
from complex derivatives of the Cauchy and logarithmic kernels.
"""

import itertools
from math import factorial

import numpy as np

CHUNK = 1024


def cauchy_derivatives(z, zeta, coeff, order):
    """F^(k)(z) for F(z) = -(1/2 pi i) sum_j coeff_j / (zeta_j - z), k = 0..order."""
    out = np.empty((order + 1, z.size), dtype=complex)
    for start in range(0, z.size, CHUNK):
        block = slice(start, start + CHUNK)
        inverse = 1.0 / (zeta[None, :] - z[block, None])
        power = inverse
        for k in range(order + 1):
            out[k, block] = -(factorial(k) / (2j * np.pi)) * (power @ coeff)
            if k < order:
                power = power * inverse
    return out


def log_derivatives(z, centers, strengths, order):
    """sum_k A_k log(z - z_k) and its derivatives (real part of the value is exact)."""
    out = np.zeros((order + 1, z.size), dtype=complex)
    for center, strength in zip(centers, strengths):
        rel = z - center
        out[0] += strength * np.log(np.abs(rel))
        for k in range(1, order + 1):
            out[k] += strength * (-1) ** (k - 1) * factorial(k - 1) / rel ** k
    return out


def barycentric_cauchy(z, zeta, weights, data, tol=1e-14):
    """
    Compensated Cauchy interpolation sum g_j w_j/(zeta_j - z) / sum w_j/(zeta_j - z)
    of boundary data ``data`` (k, N) of analytic functions; exact at nodes.
    """
    out = np.empty((data.shape[0], z.size), dtype=complex)
    for start in range(0, z.size, CHUNK):
        block = slice(start, start + CHUNK)
        rel = zeta[None, :] - z[block, None]
        hit = np.abs(rel) < tol * max(1.0, np.abs(zeta).max())
        rel = np.where(hit, 1.0, rel)
        kernel = np.where(hit, 0.0, weights[None, :] / rel)
        numerator = kernel @ data.T
        denominator = kernel.sum(axis=1)
        values = numerator / denominator[:, None]
        rows, cols = np.nonzero(hit)
        values[rows] = data[:, cols].T
        out[:, block] = values.T
    return out


def harmonic_tensors(derivs, order):
    """Real derivative tensors [u, grad, hess, third] of u = Re F."""
    tensors = [derivs[0].real.copy()]
    m = derivs.shape[1]
    for k in range(1, order + 1):
        tensor = np.empty((m,) + (2,) * k)
        for index in itertools.product((0, 1), repeat=k):
            tensor[(slice(None),) + index] = ((1j) ** sum(index) * derivs[k]).real
        tensors.append(tensor)
    return tensors


def kress_log_weights(n):
    """
    Circulant weights R[k] with sum_j R[(i - j) % n] f(s_j) approximating
    int_0^{2 pi} ln(4 sin^2((s_i - s) / 2)) f(s) ds for n equispaced nodes.
    """
    offsets = 2 * np.pi * np.arange(n) / n
    modes = np.arange(1, n // 2)
    series = (np.cos(np.outer(modes, offsets)) / modes[:, None]).sum(axis=0)
    return -(4 * np.pi / n) * series - (4 * np.pi / n ** 2) * np.cos(n // 2 * offsets)


def spectral_derivative(values, length):
    """d/ds of equispaced periodic samples on [0, 2 pi) (Nyquist mode dropped)."""
    spectrum = np.fft.fft(values)
    wavenumbers = np.fft.fftfreq(length, d=1.0 / length)
    if length % 2 == 0:
        wavenumbers[length // 2] = 0.0
    return np.fft.ifft(1j * wavenumbers * spectrum)
