"""Fourth-order finite-difference derivatives and quadrature on uniform grids.

These operators discretize the action functionals.  Fourth order keeps the
discretization error of the rate integrals far below the acceptance
tolerances even in the boundary layers of stiff transition paths, where a
second-order rule measurably pollutes the result.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["fd_weights", "derivative", "second_derivative", "integral"]


def fd_weights(offsets, order):
    """Weights w such that sum_j w[j] f(x + offsets[j]*h) ~ f^(order)(x) * h**order.

    Solves the Vandermonde moment system for the given integer offsets; the
    result must be divided by h**order at the point of use.
    """
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    if order >= n:
        raise ValueError("need more stencil points than the derivative order")
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    vander = np.vander(offsets, n, increasing=True).T
    return np.linalg.solve(vander, rhs)


# Stencils for first derivative, 4th order.
_D1_INTERIOR = fd_weights([-2, -1, 0, 1, 2], 1)
_D1_EDGE0 = fd_weights([0, 1, 2, 3, 4], 1)
_D1_EDGE1 = fd_weights([-1, 0, 1, 2, 3], 1)

# Stencils for second derivative, 4th order.
_D2_INTERIOR = fd_weights([-2, -1, 0, 1, 2], 2)
_D2_EDGE0 = fd_weights([0, 1, 2, 3, 4, 5], 2)
_D2_EDGE1 = fd_weights([-1, 0, 1, 2, 3, 4], 2)


def _apply_stencil(f, weights, start):
    out = np.zeros(f.shape[:-1])
    for k, w in enumerate(weights):
        out = out + w * f[..., start + k]
    return out


def derivative(f, h):
    """First derivative of samples ``f`` on a uniform grid of step ``h`` (O(h^4))."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] < 5:
        raise ValueError("need at least 5 points for the 4th-order derivative")
    out = np.empty_like(f)
    w = _D1_INTERIOR
    out[..., 2:-2] = (
        w[0] * f[..., :-4] + w[1] * f[..., 1:-3] + w[2] * f[..., 2:-2]
        + w[3] * f[..., 3:-1] + w[4] * f[..., 4:]
    )
    out[..., 0] = _apply_stencil(f, _D1_EDGE0, 0)
    out[..., 1] = _apply_stencil(f, _D1_EDGE1, 0)
    out[..., -2] = -_apply_stencil(f[..., ::-1], _D1_EDGE1, 0)
    out[..., -1] = -_apply_stencil(f[..., ::-1], _D1_EDGE0, 0)
    return out / h


def second_derivative(f, h):
    """Second derivative of samples ``f`` on a uniform grid of step ``h`` (O(h^4))."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] < 6:
        raise ValueError("need at least 6 points for the 4th-order second derivative")
    out = np.empty_like(f)
    w = _D2_INTERIOR
    out[..., 2:-2] = (
        w[0] * f[..., :-4] + w[1] * f[..., 1:-3] + w[2] * f[..., 2:-2]
        + w[3] * f[..., 3:-1] + w[4] * f[..., 4:]
    )
    out[..., 0] = _apply_stencil(f, _D2_EDGE0, 0)
    out[..., 1] = _apply_stencil(f, _D2_EDGE1, 0)
    out[..., -2] = _apply_stencil(f[..., ::-1], _D2_EDGE1, 0)
    out[..., -1] = _apply_stencil(f[..., ::-1], _D2_EDGE0, 0)
    return out / (h * h)


def integral(f, h):
    """Composite trapezoid with Euler-Maclaurin end correction (O(h^4))."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] < 5:
        raise ValueError("need at least 5 points for the corrected trapezoid")
    trap = h * (np.sum(f, axis=-1) - 0.5 * (f[..., 0] + f[..., -1]))
    d0 = _apply_stencil(f, _D1_EDGE0, 0) / h
    d1 = -_apply_stencil(f[..., ::-1], _D1_EDGE0, 0) / h
    return trap - (h * h / 12.0) * (d1 - d0)
