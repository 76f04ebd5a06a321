"""Linear-quadratic control of the local agents toward the central agent.

With the central drift linearized around the normal state
(-h0 V'(x0) ~ -H0 (x0+1), suggested H0 = 2 h0), each local agent receives a
control alpha_j minimizing the quadratic cost of control effort plus
theta_c^2-weighted distance to the central agent.  The optimal control is a
linear feedback

    alpha_j = -theta_c (b(t) X0 + d(t) Xj + e(t) Xbar),

in +1-shifted coordinates, with coefficients solving the scalar Riccati
system (backward from zero terminal values)

    a' = 2 (theta0+H0) a - 2 theta b + theta_c b^2 - theta_c
    b' = (theta0+H0+theta) b - theta d - theta0 a + theta_c b d + theta_c
         - theta e + theta_c b e
    d' = 2 theta d + theta_c d^2 - theta_c
    e' = -2 theta0 b + 2 theta e + theta_c (2 d e + e^2)

The full (N+1)-dimensional matrix Riccati equation reduces exactly to these
four scalar ODEs (the value matrix has the symmetric block structure
[[N a, b u'], [b u, d I + e J/N]] with u the ones vector), so the N by N
problem is never formed; the reduction is verified through the residuals of
the scalar system.  The d-channel decouples and has the closed-form steady
state d_inf = (-theta + sqrt(theta^2 + theta_c^2)) / theta_c.

As T -> infinity the coefficients reach steady values solving the algebraic
version of the system.  When several roots exist, the stabilizing branch is
the one reached by the backward integration, and that is the branch
reported here.  Three asymptotic regimes have first-order closed forms; in
the fully decoupled one (theta0 = H0 = 0) the passive and active feedbacks
combine quadratically into an effective coupling sqrt(theta^2 + theta_c^2).

Pure numerical routines, safe for concurrent parameter sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diffops
from .errors import DivergenceError
from .grids import PathGrid
from .model import ControlParams, ModelParams
from .sde import FeedbackLaw

__all__ = [
    "SteadyCoefficients",
    "RiccatiTrajectory",
    "RegimeExpansion",
    "integrate_riccati",
    "solve_algebraic_riccati",
    "algebraic_residuals",
    "ode_residual_norm",
    "regime_expansion",
    "build_feedback",
    "d_steady_closed_form",
]

#: Max change of any coefficient over the trailing 10% of backward time
#: below which the t = 0 values are accepted as steady states.
STEADY_TOL = 1e-8


@dataclass(frozen=True)
class SteadyCoefficients:
    """Steady feedback coefficients; iterates as (a, b, d, e).

    ``reduced_precision`` marks values taken from the long-horizon ODE
    integration after a failed Newton polish of the algebraic system.
    """

    a_inf: float
    b_inf: float
    d_inf: float
    e_inf: float
    reduced_precision: bool = False

    def __iter__(self):
        return iter((self.a_inf, self.b_inf, self.d_inf, self.e_inf))


@dataclass
class RiccatiTrajectory:
    """Coefficient paths on a forward-time grid plus their t = 0 values.

    The terminal values (at t = horizon) are exactly zero.  ``steady`` holds
    the t = 0 values; ``steady_converged`` says whether the trajectory had
    flattened to :data:`STEADY_TOL` over the trailing 10% of backward time.
    """

    grid: PathGrid
    steady: SteadyCoefficients
    steady_converged: bool


@dataclass(frozen=True)
class RegimeExpansion:
    """First-order steady coefficients in one of the asymptotic regimes.

    ``effective_coupling`` multiplies -(Xbar - X0) in the controlled mean
    drift; ``direct_gain`` multiplies -Xbar (nonzero only with H0 > 0).
    """

    case_id: str
    b_inf_approx: float
    e_inf_approx: float
    effective_coupling: float
    direct_gain: float


def d_steady_closed_form(theta: float, theta_c: float) -> float:
    """Stable root (-theta + sqrt(theta^2 + theta_c^2)) / theta_c of the d-channel."""
    return (-theta + math.hypot(theta, theta_c)) / theta_c


def _rates(params: ModelParams, ctrl: ControlParams):
    return params.theta0, params.theta, ctrl.theta_c, ctrl.h_cap0


def _forward_rhs(a, b, d, e, th0, th, tc, hc):
    da = 2.0 * (th0 + hc) * a - 2.0 * th * b + tc * b * b - tc
    db = (
        (th0 + hc + th) * b - th * d - th0 * a
        + tc * b * d + tc - th * e + tc * b * e
    )
    dd = 2.0 * th * d + tc * d * d - tc
    de = -2.0 * th0 * b + 2.0 * th * e + tc * (2.0 * d * e + e * e)
    return da, db, dd, de


def integrate_riccati(params: ModelParams, ctrl: ControlParams, dt: float) -> RiccatiTrajectory:
    """Integrate the Riccati system backward from zero terminal values.

    Classical RK4 in backward time (fourth-order accurate).  Raises
    :class:`DivergenceError` with the blow-up time if any coefficient leaves
    the representable range.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    ratio = ctrl.horizon / dt
    n = round(ratio)
    if abs(ratio - n) > 1e-9 * max(1.0, ratio) or n < 1:
        raise ValueError("horizon/dt must be a positive integer")
    th0, th, tc, hc = _rates(params, ctrl)

    series = [np.empty(n + 1) for _ in range(4)]
    a = b = d = e = 0.0
    for arr in series:
        arr[n] = 0.0
    for k in range(1, n + 1):
        # dy/ds = -f(y) in backward time s = horizon - t.
        k1 = _forward_rhs(a, b, d, e, th0, th, tc, hc)
        k2 = _forward_rhs(
            a - 0.5 * dt * k1[0], b - 0.5 * dt * k1[1],
            d - 0.5 * dt * k1[2], e - 0.5 * dt * k1[3], th0, th, tc, hc,
        )
        k3 = _forward_rhs(
            a - 0.5 * dt * k2[0], b - 0.5 * dt * k2[1],
            d - 0.5 * dt * k2[2], e - 0.5 * dt * k2[3], th0, th, tc, hc,
        )
        k4 = _forward_rhs(
            a - dt * k3[0], b - dt * k3[1], d - dt * k3[2], e - dt * k3[3],
            th0, th, tc, hc,
        )
        a -= (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        b -= (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        d -= (dt / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        e -= (dt / 6.0) * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        if not all(map(math.isfinite, (a, b, d, e))):
            raise DivergenceError(
                f"Riccati integration blew up at t = {ctrl.horizon - k * dt:.6g}",
                step=k,
                time=ctrl.horizon - k * dt,
            )
        idx = n - k
        series[0][idx], series[1][idx], series[2][idx], series[3][idx] = a, b, d, e

    t = np.linspace(0.0, n * dt, n + 1)
    grid = PathGrid(t, {"a": series[0], "b": series[1], "d": series[2], "e": series[3]})
    window = max(2, int(0.1 * n) + 1)
    drift = max(
        float(arr[:window].max() - arr[:window].min()) for arr in series
    )
    return RiccatiTrajectory(
        grid=grid,
        steady=SteadyCoefficients(series[0][0], series[1][0], series[2][0], series[3][0]),
        steady_converged=drift < STEADY_TOL,
    )


def algebraic_residuals(coeffs, params: ModelParams, ctrl: ControlParams) -> np.ndarray:
    """Residuals of all four algebraic steady-state equations at ``coeffs``."""
    a, b, d, e = tuple(coeffs)[:4]
    th0, th, tc, hc = _rates(params, ctrl)
    return np.array(_forward_rhs(a, b, d, e, th0, th, tc, hc))


def ode_residual_norm(traj: RiccatiTrajectory, params: ModelParams, ctrl: ControlParams) -> float:
    """Max norm of the Riccati ODE residuals along the stored trajectory.

    Differentiates the stored series with fourth-order stencils and
    substitutes into the four equations; small residuals certify the
    integration independently of the stepper.
    """
    g = traj.grid
    h = g.dt
    th0, th, tc, hc = _rates(params, ctrl)
    rhs = _forward_rhs(g["a"], g["b"], g["d"], g["e"], th0, th, tc, hc)
    worst = 0.0
    for name, expected in zip(("a", "b", "d", "e"), rhs):
        worst = max(worst, float(np.max(np.abs(diffops.derivative(g[name], h) - expected))))
    return worst


def _newton_3x3(a0, b0, e0, d, th0, th, tc, hc, tol=1e-14, max_iter=100):
    x = np.array([a0, b0, e0], dtype=float)

    def residual(v):
        a, b, e = v
        g1 = 2.0 * (th0 + hc) * a - 2.0 * th * b + tc * b * b - tc
        g2 = (
            (th0 + hc + th) * b - th * d - th0 * a
            + tc * b * d + tc - th * e + tc * b * e
        )
        g3 = -2.0 * th0 * b + 2.0 * th * e + tc * (2.0 * d * e + e * e)
        return np.array([g1, g2, g3])

    def jacobian(v):
        a, b, e = v
        return np.array(
            [
                [2.0 * (th0 + hc), -2.0 * th + 2.0 * tc * b, 0.0],
                [-th0, th0 + hc + th + tc * d + tc * e, -th + tc * b],
                [0.0, -2.0 * th0, 2.0 * th + 2.0 * tc * d + 2.0 * tc * e],
            ]
        )

    r = residual(x)
    norm = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if norm <= tol:
            break
        try:
            step = np.linalg.solve(jacobian(x), -r)
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        while alpha >= 1e-8:
            trial = x + alpha * step
            r_t = residual(trial)
            norm_t = float(np.max(np.abs(r_t)))
            if math.isfinite(norm_t) and norm_t <= (1.0 - 1e-4 * alpha) * norm:
                x, r, norm = trial, r_t, norm_t
                break
            alpha *= 0.5
        else:
            return None
    return x if norm <= tol else None


def solve_algebraic_riccati(params: ModelParams, ctrl: ControlParams) -> SteadyCoefficients:
    """Steady coefficients from the algebraic system.

    ``d_inf`` comes from its closed form; (a, b, e) from damped Newton
    seeded by a long-horizon backward integration.  When theta0 = H0 = 0
    the a-channel drops out of every equation (b = -d, e = 0 hold exactly)
    and a is reported from the integration.  If the Newton polish fails,
    the integration values are returned with ``reduced_precision`` set.
    """
    th0, th, tc, hc = _rates(params, ctrl)
    d = d_steady_closed_form(th, tc)
    seed_ctrl = ControlParams(theta_c=tc, h_cap0=hc, horizon=ctrl.horizon)
    traj = integrate_riccati(params, seed_ctrl, dt=ctrl.horizon / 20000)
    a0, b0, _, e0 = tuple(traj.steady)

    if th0 == 0.0 and hc == 0.0:
        return SteadyCoefficients(a_inf=a0, b_inf=-d, d_inf=d, e_inf=0.0)

    polished = _newton_3x3(a0, b0, e0, d, th0, th, tc, hc)
    if polished is None:
        return SteadyCoefficients(
            a_inf=a0, b_inf=b0, d_inf=d, e_inf=e0, reduced_precision=True
        )
    return SteadyCoefficients(
        a_inf=float(polished[0]), b_inf=float(polished[1]), d_inf=d, e_inf=float(polished[2])
    )


def regime_expansion(params: ModelParams, ctrl: ControlParams, case_id: str) -> RegimeExpansion:
    """First-order steady coefficients in the named asymptotic regime.

    Cases: ``decoupled`` (theta0 = H0 = 0), ``small_theta0`` (theta0 << 1,
    H0 = 0), ``small_theta0_H0`` (both << 1).  The caller is responsible
    for the smallness assumptions actually holding.
    """
    th0, th, tc, hc = _rates(params, ctrl)
    s = math.hypot(th, tc)
    d = d_steady_closed_form(th, tc)
    if case_id == "decoupled":
        return RegimeExpansion(
            case_id=case_id,
            b_inf_approx=-d,
            e_inf_approx=0.0,
            effective_coupling=s,
            direct_gain=0.0,
        )
    if case_id == "small_theta0":
        return RegimeExpansion(
            case_id=case_id,
            b_inf_approx=-d + th0 * d / s,
            e_inf_approx=-th0 * d / s,
            effective_coupling=s - th0 * (s - th) / s,
            direct_gain=0.0,
        )
    if case_id == "small_theta0_H0":
        return RegimeExpansion(
            case_id=case_id,
            b_inf_approx=-d + (th0 + hc) * d / s,
            e_inf_approx=-th0 * d / s,
            effective_coupling=s - (th0 + hc) * (s - th) / s,
            direct_gain=hc * (s - th) / s,
        )
    raise ValueError(f"unknown case_id {case_id!r}")


def build_feedback(steady, theta_c: float) -> FeedbackLaw:
    """Package steady coefficients for the controlled simulator.

    Accepts a :class:`SteadyCoefficients`, a :class:`RiccatiTrajectory`
    (which must have ``steady_converged``), or any 4-sequence (a, b, d, e).
    The per-agent law aggregates on the mean to
    -theta_c*(b_inf*X0 + (d_inf+e_inf)*Xbar).
    """
    if isinstance(steady, RiccatiTrajectory):
        if not steady.steady_converged:
            raise ValueError(
                "trajectory steady state did not converge; extend the horizon"
            )
        steady = steady.steady
    a, b, d, e = tuple(steady)[:4]
    if not all(map(math.isfinite, (a, b, d, e))):
        raise ValueError(f"steady coefficients are not finite: {(a, b, d, e)}")
    if theta_c <= 0:
        raise ValueError(f"theta_c must be > 0, got {theta_c}")
    return FeedbackLaw(b_inf=float(b), d_inf=float(d), e_inf=float(e), theta_c=float(theta_c))
