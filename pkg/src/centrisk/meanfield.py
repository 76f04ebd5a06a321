"""Mean-field limit: ODEs, stationary density, consistency equation, shifts.

In the limit of infinitely many local agents the pair (central agent, local
mean) obeys, for h = 0,

    dy0/dt = -h0 V'(y0) - theta0 (y0 - ybar),
    dybar/dt = -theta (ybar - y0),

with equilibria at (+-1, +-1).  For h >= 0 the stationary density of a
local agent given the central equilibrium y0e is

    p(x; y0e) = Z^-1 exp( -[2 h V(x) + theta (x - y0e)^2] / sigma^2 ),

and y0e must satisfy the consistency equation

    int x p(x; y0e) dx = y0e + (h0/theta0) V'(y0e).

At h = 0 the density is the Gaussian with mean y0e and variance
sigma^2/(2 theta) and the consistency equation forces y0e = +-1.  For small
h > 0 the equilibrium shifts to y0e = y0e0 + h*shift + o(h) with the shift
given by a Gaussian average of V' (closed form for the quartic:
-+ 3 theta0 sigma^2 / (4 h0 theta^2) at y0e0 = +-1).

The time-dependent Fokker-Planck problem for h > 0 is out of scope; only
its stationary solutions are computed here.  Pure functions throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.optimize

from .errors import BracketError, DivergenceError
from .grids import PathGrid
from .model import ModelParams
from .potential import DOUBLE_WELL

__all__ = [
    "MeanFieldState",
    "EquilibriumReport",
    "integrate_meanfield",
    "stationary_density",
    "partition_function",
    "solve_consistency",
    "equilibrium_shift",
    "equilibrium_shift_closed_form",
    "equilibrium_report",
]


@dataclass(frozen=True)
class MeanFieldState:
    """Limit state: central agent value and local-agent mean."""

    y0: float
    ybar: float


@dataclass(frozen=True)
class EquilibriumReport:
    """Equilibrium of the mean-field system around one stable state.

    For h = 0, ``ybar_e == y0e`` and ``y0e`` is exactly +-1.
    ``order1_shift`` is the O(h) displacement of the central equilibrium.
    """

    y0e: float
    ybar_e: float
    order1_shift: float
    partition_norm: float


def _rhs(params: ModelParams, y0: float, ybar: float):
    v1 = y0 * y0 * y0 - y0  # V'(y0)
    return (
        -params.h0 * v1 - params.theta0 * (y0 - ybar),
        -params.theta * (ybar - y0),
    )


def integrate_meanfield(
    params: ModelParams, y0_init: float, ybar_init: float, t_final: float, dt: float
) -> PathGrid:
    """Integrate the h = 0 mean-field ODE pair with classical RK4.

    Fourth-order accurate in ``dt``; raises :class:`DivergenceError` if the
    state leaves the representable range.
    """
    if params.h != 0.0:
        raise ValueError(f"mean-field ODE pair requires h = 0, got h = {params.h}")
    n = round(t_final / dt)
    if abs(t_final / dt - n) > 1e-9 * max(1.0, t_final / dt) or n < 1:
        raise ValueError("t_final/dt must be a positive integer")
    y0, yb = float(y0_init), float(ybar_init)
    ys0 = np.empty(n + 1)
    ysb = np.empty(n + 1)
    ys0[0], ysb[0] = y0, yb
    for i in range(n):
        k1 = _rhs(params, y0, yb)
        k2 = _rhs(params, y0 + 0.5 * dt * k1[0], yb + 0.5 * dt * k1[1])
        k3 = _rhs(params, y0 + 0.5 * dt * k2[0], yb + 0.5 * dt * k2[1])
        k4 = _rhs(params, y0 + dt * k3[0], yb + dt * k3[1])
        y0 += (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        yb += (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        if not (math.isfinite(y0) and math.isfinite(yb)):
            raise DivergenceError(
                f"mean-field integration diverged at step {i + 1}",
                step=i + 1,
                time=(i + 1) * dt,
            )
        ys0[i + 1], ysb[i + 1] = y0, yb
    return PathGrid(np.linspace(0.0, n * dt, n + 1), {"y0": ys0, "ybar": ysb})


def _log_unnormalized(params: ModelParams, y0e: float, x):
    v = DOUBLE_WELL.eval_derivative(0, x)
    return -(2.0 * params.h * v + params.theta * (x - y0e) ** 2) / params.sigma**2


def _integration_window(params: ModelParams, y0e: float):
    # +-10 standard deviations of the h = 0 Gaussian envelope; the quartic
    # term only thins the tails further.
    std = params.sigma / math.sqrt(2.0 * params.theta)
    return y0e - 10.0 * std, y0e + 10.0 * std


def partition_function(params: ModelParams, y0e: float) -> float:
    """Normalization Z of the stationary local-agent density."""
    if params.sigma <= 0 or params.theta <= 0:
        raise ValueError("requires sigma > 0 and theta > 0")
    lo, hi = _integration_window(params, y0e)
    value, _ = scipy.integrate.quad(
        lambda x: math.exp(_log_unnormalized(params, y0e, x)), lo, hi,
        epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return value


def stationary_density(params: ModelParams, y0e: float, x) -> float | np.ndarray:
    """Stationary density of a local agent given central equilibrium ``y0e``."""
    z = partition_function(params, y0e)
    x = np.asarray(x, dtype=float)
    out = np.exp(_log_unnormalized(params, y0e, x)) / z
    return out if out.ndim else float(out)


def _mean_offset(params: ModelParams, y: float) -> float:
    """int (x - y) p(x; y) dx, computed with the shifted integrand."""
    lo, hi = _integration_window(params, y)
    num, _ = scipy.integrate.quad(
        lambda x: (x - y) * math.exp(_log_unnormalized(params, y, x)), lo, hi,
        epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return num / partition_function(params, y)


def consistency_residual(params: ModelParams, y: float) -> float:
    """Residual of the consistency equation at candidate equilibrium ``y``."""
    v1 = DOUBLE_WELL.eval_derivative(1, y)
    return _mean_offset(params, y) - (params.h0 / params.theta0) * v1


def solve_consistency(params: ModelParams, bracket: tuple[float, float]) -> float:
    """Root of the consistency equation on ``bracket`` (safeguarded solver).

    The residual must change sign on the bracket, otherwise
    :class:`BracketError` is raised; this surfaces the nonexistence of an
    equilibrium rather than guessing a validity range.
    """
    if params.h0 <= 0 or params.theta0 <= 0:
        raise ValueError("requires h0 > 0 and theta0 > 0")
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = consistency_residual(params, lo)
    f_hi = consistency_residual(params, hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise BracketError(
            f"consistency residual does not change sign on [{lo}, {hi}] "
            f"(values {f_lo:.3e}, {f_hi:.3e})"
        )
    return float(
        scipy.optimize.brentq(
            lambda y: consistency_residual(params, y), lo, hi, xtol=1e-12, rtol=1e-15
        )
    )


def equilibrium_shift(params: ModelParams, y0e0: float) -> float:
    """First-order equilibrium shift of the central agent for small h.

    Evaluates the Gaussian average of V' around ``y0e0`` by quadrature:

        shift = -theta0 / (h0 theta V''(y0e0)) * E[ V'(y0e0 + xi) ],
        xi ~ N(0, sigma^2 / (2 theta)).
    """
    if params.h0 <= 0 or params.theta <= 0:
        raise ValueError("requires h0 > 0 and theta > 0")
    std = params.sigma / math.sqrt(2.0 * params.theta)
    weight = lambda x: math.exp(-params.theta * x * x / params.sigma**2)
    num, _ = scipy.integrate.quad(
        lambda x: weight(x) * DOUBLE_WELL.eval_derivative(1, y0e0 + x),
        -10.0 * std, 10.0 * std, epsabs=0.0, epsrel=1e-12, limit=200,
    )
    den, _ = scipy.integrate.quad(weight, -10.0 * std, 10.0 * std,
                                  epsabs=0.0, epsrel=1e-12, limit=200)
    v2 = DOUBLE_WELL.eval_derivative(2, y0e0)
    return -params.theta0 / (params.h0 * params.theta * v2) * (num / den)


def equilibrium_shift_closed_form(params: ModelParams, y0e0: float) -> float:
    """Closed form of the shift for the canonical quartic: -+3 theta0 sigma^2/(4 h0 theta^2)."""
    if y0e0 not in (-1.0, 1.0):
        raise ValueError(f"closed form holds at the stable states +-1, got {y0e0}")
    return -y0e0 * 3.0 * params.theta0 * params.sigma**2 / (4.0 * params.h0 * params.theta**2)


def equilibrium_report(params: ModelParams, sign: int = -1) -> EquilibriumReport:
    """Equilibrium summary near the stable state ``sign`` (+1 or -1).

    For h = 0 the equilibrium is exact; for h > 0 the reported ``y0e`` is the
    consistency-equation root bracketed around ``sign`` and ``ybar_e`` the
    associated local mean.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    y0e0 = float(sign)
    if params.h == 0.0:
        y0e = y0e0
    else:
        y0e = solve_consistency(params, (y0e0 - 0.5, y0e0 + 0.5))
    v1 = DOUBLE_WELL.eval_derivative(1, y0e)
    ybar_e = y0e + (params.h0 / params.theta0) * v1 if params.theta0 > 0 else y0e
    return EquilibriumReport(
        y0e=y0e,
        ybar_e=ybar_e,
        order1_shift=equilibrium_shift(params, y0e0),
        partition_norm=partition_function(params, y0e),
    )
