"""Chebyshev-Lobatto grid utilities on an interval ``[0, R]``."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct


def lobatto_grid(R: float, m: int) -> np.ndarray:
    """``m + 1`` Chebyshev-Lobatto nodes on ``[0, R]`` in increasing order."""
    i = np.arange(m + 1)
    rho = 0.5 * R * (1.0 - np.cos(np.pi * i / m))
    rho[0], rho[-1] = 0.0, R
    return rho


def clenshaw_curtis_weights(R: float, m: int) -> np.ndarray:
    """Quadrature weights matching :func:`lobatto_grid`."""
    theta = np.pi * np.arange(m + 1) / m
    w = np.zeros(m + 1)
    v = np.ones(m - 1)
    inner = slice(1, m)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m**2 - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
        v -= np.cos(m * theta[inner]) / (m**2 - 1)
    else:
        w[0] = w[m] = 1.0 / m**2
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
    w[inner] = 2.0 * v / m
    return 0.5 * R * w


def cheb_coefficients(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through values on the grid."""
    y = np.asarray(values, dtype=float)[::-1]
    m = y.size - 1
    a = dct(y, type=1) / m
    a[0] *= 0.5
    a[-1] *= 0.5
    return a


def cumulative_integral(values: np.ndarray, R: float) -> np.ndarray:
    """``int_0^rho_i g`` for every grid node, by exact integration of the interpolant."""
    a = cheb_coefficients(values)
    m = a.size - 1
    x = -np.cos(np.pi * np.arange(m + 1) / m)
    ai = C.chebint(a, lbnd=-1.0)
    return 0.5 * R * C.chebval(x, ai)


def interpolate(values: np.ndarray, R: float, rho) -> np.ndarray:
    a = cheb_coefficients(values)
    return C.chebval(2.0 * np.asarray(rho) / R - 1.0, a)
