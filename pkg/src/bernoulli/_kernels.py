"""Compiled inner loops for the ring solver.

Stencil layout: ``coef[k, i, j]`` multiplies ``u[i + DI[k], j + DJ[k]]``
(angular index i periodic, radial index j), k = 0 is the centre.
"""
import numpy as np
from numba import njit

# centre, +s, -s, +theta, -theta, (+s,+theta), (+s,-theta), (-s,+theta), (-s,-theta)
DJ = np.array([0, 1, -1, 0, 0, 1, 1, -1, -1])
DI = np.array([0, 0, 0, 1, -1, 1, -1, 1, -1])


@njit(cache=True)
def sor_solve(u, coef, omega, tol, max_sweeps):
    """Lexicographic SOR on interior rows; returns (sweeps, last max update)."""
    M, L = u.shape
    delta = 0.0
    for sweep in range(1, max_sweeps + 1):
        delta = 0.0
        for i in range(M):
            ip = (i + 1) % M
            im = (i - 1) % M
            for j in range(1, L - 1):
                s = (coef[1, i, j] * u[i, j + 1] + coef[2, i, j] * u[i, j - 1]
                     + coef[3, i, j] * u[ip, j] + coef[4, i, j] * u[im, j]
                     + coef[5, i, j] * u[ip, j + 1] + coef[6, i, j] * u[im, j + 1]
                     + coef[7, i, j] * u[ip, j - 1] + coef[8, i, j] * u[im, j - 1])
                gs = -s / coef[0, i, j]
                d = omega * (gs - u[i, j])
                u[i, j] += d
                if abs(d) > delta:
                    delta = abs(d)
        if delta < tol:
            return sweep, delta
    return max_sweeps, delta


@njit(cache=True)
def apply_stencil(u, coef):
    """Stencil residual at interior nodes (zero on the boundary rows)."""
    M, L = u.shape
    out = np.zeros_like(u)
    for i in range(M):
        ip = (i + 1) % M
        im = (i - 1) % M
        for j in range(1, L - 1):
            out[i, j] = (coef[0, i, j] * u[i, j]
                         + coef[1, i, j] * u[i, j + 1] + coef[2, i, j] * u[i, j - 1]
                         + coef[3, i, j] * u[ip, j] + coef[4, i, j] * u[im, j]
                         + coef[5, i, j] * u[ip, j + 1] + coef[6, i, j] * u[im, j + 1]
                         + coef[7, i, j] * u[ip, j - 1] + coef[8, i, j] * u[im, j - 1])
    return out
