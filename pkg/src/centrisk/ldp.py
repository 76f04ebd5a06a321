"""Rare-event analysis: action functionals, most probable transition paths,
and transition-probability estimates for the h = 0 pair (x0, xbar).

The transition of interest starts at the normal state (-1, -1) and ends at
the failed state (+1, +1) at horizon T.  Its probability decays
exponentially in the number of agents N with rate inf I over connecting
paths, where the action I depends on whether the central agent carries
noise:

* degenerate (sigma0 = 0):

      I = 1/(2 sigma^2) int_0^T (xbar' + theta (xbar - x0))^2 dt

  subject to the hard constraint x0' = -h0 V'(x0) - theta0 (x0 - xbar);
  substituting xbar = x0 + x0'/theta0 + (h0/theta0) V'(x0) reduces the
  minimization to a fourth-order scalar boundary value problem in x0 with
  x0(0) = -1, x0(T) = 1, x0'(0) = x0'(T) = 0.

* non-degenerate (sigma0 > 0): both channels are penalized,

      I = 1/(2 sigma0^2) int (x0' + h0 V'(x0) + theta0 (x0 - xbar))^2 dt
        + 1/(2 sigma^2)  int (xbar' + theta (xbar - x0))^2 dt,

  and the minimizer solves a coupled second-order system with all four
  endpoint values pinned.

Both boundary value problems are solved by fourth-order Hermite-Simpson
collocation with damped Newton (see :mod:`centrisk.collocation`); shooting
is provided only as a diagnostic because single shooting is fragile for
these problems.  For h0 = 0 in the degenerate case the minimizer is known
explicitly and serves as an oracle; stiff h0 > 0 problems are reached by
continuation in h0, seeding each solve with the previous solution.

Endpoints are pinned exactly at (+1, +1): the endpoint ball of the rare
event can be shrunk at no cost in the exponential rate, so no tolerance
radius enters the solvers.

Solvers are single-threaded per problem instance; independent instances
share no mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from . import diffops
from .collocation import solve_collocation
from .errors import ContinuationError, InfeasiblePathError, NonConvergenceError
from .fluctuations import terminal_covariance_h0_zero
from .grids import PathGrid
from .model import ModelParams

__all__ = [
    "TransitionEvent",
    "BvpSolution",
    "LdpEstimate",
    "rate_degenerate",
    "rate_nondegenerate",
    "closed_form_path_h0_zero",
    "degenerate_rate_closed_form",
    "nondegenerate_rate_large_t",
    "linear_transition_rate_exact",
    "solve_bvp_degenerate",
    "solve_bvp_nondegenerate",
    "continue_in_h0",
    "transition_probability",
    "reduced_action_degenerate",
    "admissible_perturbations",
    "directional_derivatives",
    "shooting_defect",
]


@dataclass(frozen=True)
class TransitionEvent:
    """Transition from the normal to the failed equilibrium within ``horizon``.

    ``tolerance_delta`` is the conceptual endpoint-ball radius of the event;
    the solvers pin the endpoint exactly, so it never enters numerics.
    """

    horizon: float
    start: tuple[float, float] = (-1.0, -1.0)
    end: tuple[float, float] = (1.0, 1.0)
    tolerance_delta: float = 0.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")


@dataclass
class BvpSolution:
    """A converged most probable path.

    ``grid`` carries the ``x0`` and ``xbar`` series; ``rate_value`` is the
    action at the solution in per-agent units; ``ode_residual_norm`` is the
    collocation defect in the max norm; ``state`` is the full solver state
    (one row per first-order component), reusable as a continuation seed.
    """

    grid: PathGrid
    rate_value: float
    ode_residual_norm: float
    newton_iterations: int
    converged: bool
    kind: str
    state: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class LdpEstimate:
    """Exponential estimate log P = -N * inf I, kept in log space."""

    rate_infimum: float
    n_agents: int
    log_probability: float


# --------------------------------------------------------------------------
# Action functionals on path grids
# --------------------------------------------------------------------------


def _reconstruct_x0(params: ModelParams, t, xbar):
    """Integrate the central-agent constraint along a given xbar series.

    Classical RK4 with midpoint values of xbar from linear interpolation;
    starts from x0(0) = xbar(0).
    """
    h = float(t[1] - t[0])
    x0 = np.empty_like(xbar)
    x0[0] = xbar[0]
    h0, th0 = params.h0, params.theta0

    def f(x, xb):
        return -h0 * (x**3 - x) - th0 * (x - xb)

    for i in range(len(t) - 1):
        xb0, xb1 = xbar[i], xbar[i + 1]
        xbm = 0.5 * (xb0 + xb1)
        x = x0[i]
        k1 = f(x, xb0)
        k2 = f(x + 0.5 * h * k1, xbm)
        k3 = f(x + 0.5 * h * k2, xbm)
        k4 = f(x + h * k3, xb1)
        x0[i + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x0


def rate_degenerate(path: PathGrid, params: ModelParams, constraint_tol: float = 1e-4) -> float:
    """Action of a path in the degenerate case sigma0 = 0.

    ``path`` must supply ``xbar``; ``x0`` is either supplied and checked
    against the drift constraint, or reconstructed from it.  A supplied
    ``x0`` whose constraint residual exceeds ``constraint_tol`` (scaled by
    1 + max|x0'|) makes the action infinite, reported by raising
    :class:`InfeasiblePathError` rather than returning a float infinity.
    """
    if params.sigma0 != 0.0:
        raise ValueError(f"degenerate action requires sigma0 = 0, got {params.sigma0}")
    if params.h != 0.0:
        raise ValueError(f"requires h = 0, got {params.h}")
    if "xbar" not in path.series:
        raise ValueError("path must supply the series 'xbar'")
    h = path.dt
    xbar = path["xbar"]
    if "x0" in path.series:
        x0 = path["x0"]
        if x0.shape != xbar.shape:
            raise ValueError("x0 and xbar must share the grid")
        dx0 = diffops.derivative(x0, h)
        residual = dx0 + params.h0 * (x0**3 - x0) + params.theta0 * (x0 - xbar)
        bound = constraint_tol * (1.0 + float(np.max(np.abs(dx0))))
        worst = float(np.max(np.abs(residual)))
        if worst > bound:
            raise InfeasiblePathError(
                f"x0 violates the drift constraint (residual {worst:.3e} > {bound:.3e}); "
                "the action is infinite",
                residual=worst,
            )
    else:
        x0 = _reconstruct_x0(params, path.t, xbar)
    control = diffops.derivative(xbar, h) + params.theta * (xbar - x0)
    return float(diffops.integral(control**2, h) / (2.0 * params.sigma**2))


def rate_nondegenerate(path: PathGrid, params: ModelParams) -> float:
    """Action of a path in the non-degenerate case sigma0 > 0 (both series required)."""
    if params.sigma0 <= 0.0:
        raise ValueError(f"non-degenerate action requires sigma0 > 0, got {params.sigma0}")
    if params.h != 0.0:
        raise ValueError(f"requires h = 0, got {params.h}")
    for name in ("x0", "xbar"):
        if name not in path.series:
            raise ValueError(f"path must supply the series {name!r}")
    h = path.dt
    x0, xbar = path["x0"], path["xbar"]
    central = diffops.derivative(x0, h) + params.h0 * (x0**3 - x0) + params.theta0 * (x0 - xbar)
    local = diffops.derivative(xbar, h) + params.theta * (xbar - x0)
    return float(
        diffops.integral(central**2, h) / (2.0 * params.sigma0**2)
        + diffops.integral(local**2, h) / (2.0 * params.sigma**2)
    )


def reduced_action_degenerate(x0_series, h: float, params: ModelParams) -> float:
    """Degenerate action as a functional of the central path alone.

    Uses the substitution xbar = x0 + x0'/theta0 + (h0/theta0) V'(x0), so
    admissible perturbations only need x0-endpoint and slope conditions.
    """
    x0 = np.asarray(x0_series, dtype=float)
    d1 = diffops.derivative(x0, h)
    d2 = diffops.second_derivative(x0, h)
    v1 = x0**3 - x0
    v2 = 3.0 * x0**2 - 1.0
    th0, th, h0 = params.theta0, params.theta, params.h0
    psi = d2 + (h0 * v2 + th0 + th) * d1 + th * h0 * v1
    return float(diffops.integral(psi**2, h) / (2.0 * params.sigma**2 * th0**2))


# --------------------------------------------------------------------------
# Closed forms for h0 = 0
# --------------------------------------------------------------------------


def _h0_zero_profile(params: ModelParams, t):
    tb = params.theta0 + params.theta
    t_final = float(t[-1])
    decay = math.exp(-tb * t_final)
    amp = 1.0 + decay
    denom = t_final * amp + (2.0 / tb) * (decay - 1.0)
    e_lo = np.exp(-tb * t)
    e_hi = np.exp(-tb * (t_final - t))
    x0 = (amp * (2.0 * t - t_final) + (2.0 / tb) * (e_lo - e_hi)) / denom
    v = (2.0 * amp - 2.0 * e_lo - 2.0 * e_hi) / denom
    w = (2.0 * tb * e_lo - 2.0 * tb * e_hi) / denom
    u = (-2.0 * tb**2 * e_lo - 2.0 * tb**2 * e_hi) / denom
    return x0, v, w, u


def closed_form_path_h0_zero(params: ModelParams, t_final: float, n_points: int) -> BvpSolution:
    """Explicit most probable path for sigma0 = h0 = 0 (degenerate case).

    The central path is antisymmetric about T/2 and the local mean leads it:
    xbar = x0 + x0'/theta0 >= x0 strictly on the interior.
    """
    if params.sigma0 != 0.0 or params.h0 != 0.0 or params.h != 0.0:
        raise ValueError("closed form requires sigma0 = h0 = h = 0")
    if params.theta0 <= 0 or params.theta <= 0:
        raise ValueError("requires theta0 > 0 and theta > 0")
    t = np.linspace(0.0, t_final, n_points)
    x0, v, w, u = _h0_zero_profile(params, t)
    xbar = x0 + v / params.theta0
    grid = PathGrid(t, {"x0": x0, "xbar": xbar})
    return BvpSolution(
        grid=grid,
        rate_value=rate_degenerate(grid, params),
        ode_residual_norm=0.0,
        newton_iterations=0,
        converged=True,
        kind="degenerate",
        state=np.vstack([x0, v, w, u]),
    )


def degenerate_rate_closed_form(params: ModelParams, t_final: float) -> float:
    """Analytic infimum of the degenerate action for h0 = 0.

    Equals 2 (theta0+theta)^2 / (sigma^2 theta0^2) * (1 + q) /
    (T (1 + q) - 2 (1 - q) / (theta0+theta)) with q = exp(-(theta0+theta) T).
    """
    tb = params.theta0 + params.theta
    q = math.exp(-tb * t_final)
    denom = t_final * (1.0 + q) - (2.0 / tb) * (1.0 - q)
    return 2.0 * tb**2 * (1.0 + q) / (params.sigma**2 * params.theta0**2 * denom)


def nondegenerate_rate_large_t(params: ModelParams, t_final: float) -> float:
    """Large-T decay rate 2 (theta0+theta)^2 / (T (theta^2 sigma0^2 + theta0^2 sigma^2))."""
    tb = params.theta0 + params.theta
    return 2.0 * tb**2 / (
        t_final * (params.theta**2 * params.sigma0**2 + params.theta0**2 * params.sigma**2)
    )


def linear_transition_rate_exact(params: ModelParams, t_final: float) -> float:
    """Exact finite-T rate for the h0 = 0 linear pair (any sigma0 >= 0).

    The endpoint (x0(T), xbar(T)) is Gaussian with mean (-1, -1) and
    covariance Sigma/N, so the endpoint-constrained infimum of the action is
    the Gaussian exponent (1/2) d' Sigma^-1 d with d = (2, 2).
    """
    cov = terminal_covariance_h0_zero(params, t_final).exact * params.n_agents
    d = np.array([2.0, 2.0])
    return float(0.5 * d @ np.linalg.solve(cov, d))


# --------------------------------------------------------------------------
# Boundary value problems
# --------------------------------------------------------------------------


def _rhs_degenerate(params: ModelParams):
    h0, th0, th = params.h0, params.theta0, params.theta
    tb2 = (th0 + th) ** 2

    def rhs(t, y):
        x, v, w, u = y
        v1 = x**3 - x
        v2 = 3.0 * x**2 - 1.0
        v3 = 6.0 * x
        b1 = 6.0 * v**3 + 3.0 * v3 * v * w - th0 * v3 * v**2 - 2.0 * th0 * v2 * w
        hh = -v3 * v**2 - v2 * w + th**2 * v1
        g = tb2 * w - h0 * b1 - h0**2 * v2 * hh
        return np.vstack([v, w, u, g])

    def jac(t, y):
        x, v, w, u = y
        k = x.shape[0]
        v1 = x**3 - x
        v2 = 3.0 * x**2 - 1.0
        v3 = 6.0 * x
        hh = -v3 * v**2 - v2 * w + th**2 * v1
        db1_dx = 18.0 * v * w - 6.0 * th0 * v**2 - 12.0 * th0 * x * w
        db1_dv = 18.0 * v**2 + 18.0 * x * w - 12.0 * th0 * x * v
        db1_dw = 18.0 * x * v - 2.0 * th0 * v2
        db2_dx = v3 * hh + v2 * (-6.0 * v**2 - v3 * w + th**2 * v2)
        db2_dv = v2 * (-2.0 * v3 * v)
        db2_dw = -v2 * v2
        out = np.zeros((k, 4, 4))
        out[:, 0, 1] = 1.0
        out[:, 1, 2] = 1.0
        out[:, 2, 3] = 1.0
        out[:, 3, 0] = -h0 * db1_dx - h0**2 * db2_dx
        out[:, 3, 1] = -h0 * db1_dv - h0**2 * db2_dv
        out[:, 3, 2] = tb2 - h0 * db1_dw - h0**2 * db2_dw
        return out

    return rhs, jac


def _rhs_nondegenerate(params: ModelParams):
    h0, th0, th = params.h0, params.theta0, params.theta
    s0sq, ssq = params.sigma0**2, params.sigma**2
    c1 = (ssq * th0 - s0sq * th) / ssq
    c2 = (ssq * th0**2 + s0sq * th**2) / ssq
    c3 = (s0sq * th - ssq * th0) / s0sq
    c4 = (s0sq * th**2 + ssq * th0**2) / s0sq
    c5 = ssq * th0 / s0sq

    def rhs(t, y):
        x0, p, xb, q = y
        v1 = x0**3 - x0
        v2 = 3.0 * x0**2 - 1.0
        delta = x0 - xb
        f2 = c1 * q + c2 * delta + h0 * th0 * (v1 + v2 * delta) + h0**2 * v1 * v2
        f4 = c3 * p + c4 * (-delta) - h0 * c5 * v1
        return np.vstack([p, f2, q, f4])

    def jac(t, y):
        x0, p, xb, q = y
        k = x0.shape[0]
        v1 = x0**3 - x0
        v2 = 3.0 * x0**2 - 1.0
        v3 = 6.0 * x0
        delta = x0 - xb
        out = np.zeros((k, 4, 4))
        out[:, 0, 1] = 1.0
        out[:, 1, 0] = c2 + h0 * th0 * (2.0 * v2 + v3 * delta) + h0**2 * (v2 * v2 + v1 * v3)
        out[:, 1, 2] = -c2 - h0 * th0 * v2
        out[:, 1, 3] = c1
        out[:, 2, 3] = 1.0
        out[:, 3, 0] = -c4 - h0 * c5 * v2
        out[:, 3, 2] = c4
        out[:, 3, 1] = c3
        return out

    return rhs, jac


def _preset_state(name: str, t, kind: str):
    k = t.size
    t_final = float(t[-1])
    if name == "constant":
        x = np.full(k, -1.0)
        slope = np.zeros(k)
    elif name == "line":
        x = -1.0 + 2.0 * t / t_final
        slope = np.full(k, 2.0 / t_final)
    else:
        raise ValueError(f"unknown preset {name!r}")
    if kind == "degenerate":
        return np.vstack([x, slope, np.zeros(k), np.zeros(k)])
    return np.vstack([x, slope, x.copy(), slope.copy()])


def _seed_state(initial_guess, t, kind: str, params: ModelParams):
    """Resolve an initial guess (preset name, BvpSolution, or PathGrid) to a state."""
    if isinstance(initial_guess, str):
        return _preset_state(initial_guess, t, kind)
    if isinstance(initial_guess, BvpSolution):
        src_t = initial_guess.grid.t
        return np.vstack(
            [np.interp(t, src_t, row) for row in initial_guess.state]
        )
    if isinstance(initial_guess, PathGrid):
        h = initial_guess.dt
        src_t = initial_guess.t
        if kind == "degenerate":
            x = initial_guess["x0"]
            v = diffops.derivative(x, h)
            w = diffops.second_derivative(x, h)
            u = diffops.derivative(w, h)
            rows = (x, v, w, u)
        else:
            x = initial_guess["x0"]
            xb = initial_guess["xbar"]
            rows = (x, diffops.derivative(x, h), xb, diffops.derivative(xb, h))
        return np.vstack([np.interp(t, src_t, row) for row in rows])
    raise TypeError(f"unsupported initial guess {initial_guess!r}")


def _solve_one(params, t_final, mesh_points, guess, kind, tol, max_iter):
    t = np.linspace(0.0, t_final, mesh_points)
    if kind == "degenerate":
        rhs, jac = _rhs_degenerate(params)
        bcs = ((0, 0, -1.0), (0, 1, 0.0), (-1, 0, 1.0), (-1, 1, 0.0))
    else:
        rhs, jac = _rhs_nondegenerate(params)
        bcs = ((0, 0, -1.0), (0, 2, -1.0), (-1, 0, 1.0), (-1, 2, 1.0))
    y0 = _seed_state(guess, t, kind, params)
    y, info = solve_collocation(rhs, jac, t, y0, bcs, tol=tol, max_iter=max_iter)
    if kind == "degenerate":
        x0, v = y[0], y[1]
        xbar = x0 + v / params.theta0 + (params.h0 / params.theta0) * (x0**3 - x0)
        grid = PathGrid(t, {"x0": x0, "xbar": xbar})
        # Feasible by construction; the loose tolerance only guards gross errors.
        rate = rate_degenerate(grid, params, constraint_tol=1e-2)
    else:
        grid = PathGrid(t, {"x0": y[0], "xbar": y[2]})
        rate = rate_nondegenerate(grid, params)
    return BvpSolution(
        grid=grid,
        rate_value=rate,
        ode_residual_norm=info["defect_norm"],
        newton_iterations=info["iterations"],
        converged=info["converged"],
        kind=kind,
        state=y,
    )


def _solve_with_presets(params, t_final, mesh_points, initial_guess, kind, tol, max_iter):
    if initial_guess != "auto":
        return _solve_one(params, t_final, mesh_points, initial_guess, kind, tol, max_iter)
    best = None
    failure = None
    for preset in ("line", "constant"):
        try:
            sol = _solve_one(params, t_final, mesh_points, preset, kind, tol, max_iter)
        except NonConvergenceError as exc:
            failure = exc
            continue
        if best is None or sol.rate_value < best.rate_value:
            best = sol
    if best is None:
        raise failure
    return best


def solve_bvp_degenerate(
    params: ModelParams,
    t_final: float,
    mesh_points: int,
    initial_guess="auto",
    tol: float = 1e-10,
    max_iter: int = 50,
) -> BvpSolution:
    """Most probable path for sigma0 = 0 via the fourth-order scalar problem.

    ``initial_guess`` is "auto" (try the straight line and the constant
    preset, keep the converged solution of lower action), a preset name, a
    previous :class:`BvpSolution`, or a :class:`PathGrid` with an ``x0``
    series.  The local mean is reconstructed from the constraint
    xbar = x0 + x0'/theta0 + (h0/theta0) V'(x0).
    """
    if params.sigma0 != 0.0:
        raise ValueError(f"degenerate problem requires sigma0 = 0, got {params.sigma0}")
    if params.h != 0.0:
        raise ValueError(f"requires h = 0, got {params.h}")
    if params.theta0 <= 0 or params.theta <= 0:
        raise ValueError("requires theta0 > 0 and theta > 0")
    if mesh_points < 8:
        raise ValueError("mesh_points must be at least 8")
    return _solve_with_presets(
        params, t_final, mesh_points, initial_guess, "degenerate", tol, max_iter
    )


def solve_bvp_nondegenerate(
    params: ModelParams,
    t_final: float,
    mesh_points: int,
    initial_guess="auto",
    tol: float = 1e-10,
    max_iter: int = 50,
) -> BvpSolution:
    """Most probable path for sigma0 > 0 via the coupled second-order system."""
    if params.sigma0 <= 0.0:
        raise ValueError(f"non-degenerate problem requires sigma0 > 0, got {params.sigma0}")
    if params.h != 0.0:
        raise ValueError(f"requires h = 0, got {params.h}")
    if mesh_points < 8:
        raise ValueError("mesh_points must be at least 8")
    return _solve_with_presets(
        params, t_final, mesh_points, initial_guess, "nondegenerate", tol, max_iter
    )


def _solver_for(params: ModelParams):
    return solve_bvp_degenerate if params.sigma0 == 0.0 else solve_bvp_nondegenerate


def continue_in_h0(
    params: ModelParams,
    t_final: float,
    h0_schedule,
    mesh_points: int,
    tol: float = 1e-10,
    max_iter: int = 50,
    max_bisections: int = 6,
) -> list[BvpSolution]:
    """Solve the appropriate BVP along an increasing h0 schedule.

    Each solve is seeded with the previous solution; a failing step is
    bisected in h0 (to depth ``max_bisections``) before giving up with
    :class:`ContinuationError` naming the failing interval.  Returns one
    solution per schedule entry.
    """
    schedule = [float(v) for v in h0_schedule]
    if not schedule:
        raise ValueError("empty h0 schedule")
    if any(b < a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("h0 schedule must be non-decreasing")
    solver = _solver_for(params)

    def attempt(h0_value, guess):
        return solver(
            params.with_(h0=h0_value), t_final, mesh_points,
            initial_guess=guess, tol=tol, max_iter=max_iter,
        )

    def advance(sol_from, h0_from, h0_to, depth):
        guess = sol_from if sol_from is not None else "auto"
        try:
            return attempt(h0_to, guess)
        except NonConvergenceError:
            if depth <= 0 or h0_to - h0_from < 1e-12:
                raise ContinuationError(
                    f"continuation failed on h0 interval [{h0_from}, {h0_to}]",
                    interval=(h0_from, h0_to),
                ) from None
            mid = 0.5 * (h0_from + h0_to)
            sol_mid = advance(sol_from, h0_from, mid, depth - 1)
            return advance(sol_mid, mid, h0_to, depth - 1)

    solutions = []
    prev = None
    prev_h0 = None
    for h0_value in schedule:
        if prev is None:
            sol = attempt(h0_value, "auto")
        else:
            sol = advance(prev, prev_h0, h0_value, max_bisections)
        solutions.append(sol)
        prev, prev_h0 = sol, h0_value
    return solutions


def transition_probability(rate_infimum: float, n_agents: int) -> LdpEstimate:
    """Package the exponential estimate; never exponentiates (underflow-safe)."""
    if rate_infimum < 0:
        raise ValueError(f"rate must be >= 0, got {rate_infimum}")
    if n_agents < 1:
        raise ValueError(f"n_agents must be >= 1, got {n_agents}")
    return LdpEstimate(
        rate_infimum=float(rate_infimum),
        n_agents=int(n_agents),
        log_probability=-float(n_agents) * float(rate_infimum),
    )


# --------------------------------------------------------------------------
# Optimality certificates and diagnostics
# --------------------------------------------------------------------------


def admissible_perturbations(t, n: int, seed: int = 0):
    """Smooth random perturbations with value and slope zero at both ends.

    Each is (s (1-s))^2 times a random cubic in s = t/T, normalized to unit
    discrete L2 norm.
    """
    t = np.asarray(t, dtype=float)
    h = (t[-1] - t[0]) / (t.size - 1)
    s = (t - t[0]) / (t[-1] - t[0])
    window = (s * (1.0 - s)) ** 2
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    out = []
    for _ in range(n):
        coeffs = rng.standard_normal(4)
        phi = window * (coeffs[0] + coeffs[1] * s + coeffs[2] * s**2 + coeffs[3] * s**3)
        norm = math.sqrt(diffops.integral(phi**2, h))
        out.append(phi / norm)
    return out


def directional_derivatives(
    sol: BvpSolution,
    params: ModelParams,
    n_perturbations: int = 20,
    eps: float = 1e-5,
    seed: int = 0,
):
    """Central-difference directional derivatives of the discretized action.

    For a degenerate solution the action is the reduced functional of x0 and
    each perturbation moves x0; for a non-degenerate solution both series
    are perturbed independently.  At a minimizer every value is ~< 1e-5 in
    units of the unit-norm perturbation.
    """
    t = sol.grid.t
    h = sol.grid.dt
    phis = admissible_perturbations(t, n_perturbations, seed=seed)
    out = []
    if sol.kind == "degenerate":
        x0 = sol.state[0]
        for phi in phis:
            plus = reduced_action_degenerate(x0 + eps * phi, h, params)
            minus = reduced_action_degenerate(x0 - eps * phi, h, params)
            out.append((plus - minus) / (2.0 * eps))
    else:
        x0, xbar = sol.grid["x0"], sol.grid["xbar"]
        pair_phis = admissible_perturbations(t, 2 * n_perturbations, seed=seed)
        for j in range(n_perturbations):
            phi0, phi1 = pair_phis[2 * j], pair_phis[2 * j + 1]
            grid_p = PathGrid(t, {"x0": x0 + eps * phi0, "xbar": xbar + eps * phi1})
            grid_m = PathGrid(t, {"x0": x0 - eps * phi0, "xbar": xbar - eps * phi1})
            plus = rate_nondegenerate(grid_p, params)
            minus = rate_nondegenerate(grid_m, params)
            out.append((plus - minus) / (2.0 * eps))
    return np.asarray(out)


def shooting_defect(sol: BvpSolution, params: ModelParams) -> float:
    """Diagnostic: re-integrate the optimality ODE from the left end as an
    initial value problem and report the terminal boundary mismatch.

    Single shooting amplifies errors exponentially for stiff parameters;
    a large defect therefore flags either an unconverged solution or an
    ill-conditioned shooting problem, which is why the solvers use
    collocation instead.
    """
    rhs, _ = (_rhs_degenerate if sol.kind == "degenerate" else _rhs_nondegenerate)(params)

    def f(t, y):
        return rhs(np.array([t]), y[:, None]).ravel()

    t = sol.grid.t
    result = scipy.integrate.solve_ivp(
        f, (t[0], t[-1]), sol.state[:, 0], rtol=1e-10, atol=1e-12, dense_output=False
    )
    if not result.success or not np.all(np.isfinite(result.y[:, -1])):
        return math.inf
    yT = result.y[:, -1]
    if sol.kind == "degenerate":
        return float(max(abs(yT[0] - 1.0), abs(yT[1])))
    return float(max(abs(yT[0] - 1.0), abs(yT[2] - 1.0)))
