"""Linearized fluctuations of the pair (central agent, local mean) at h = 0.

Centered at an equilibrium y0e of the mean-field limit and scaled by
sqrt(N), the pair converges to a Gaussian process (z0, zbar) driven by

    dz0   = -(h0*V''(y0e) + theta0) z0 dt + theta0 zbar dt + sigma0 dW0
    dzbar = theta z0 dt - theta zbar dt + sigma dW

with drift matrix A = [[-h0*V''(y0e)-theta0, theta0], [theta, -theta]] and
independent noises.  Everything about this process is computable in closed
form through the eigen-decomposition of A:

    lambda_{1,2} = ( -S +- sqrt(S^2 - 4*theta*h0*V''(y0e)) ) / 2,
    S = h0*V''(y0e) + theta0 + theta,

and the time-t covariance is int_0^t e^{uA} diag(sigma0^2, sigma^2) e^{uA'} du.

Two independent routes to the stationary covariance are implemented: the
explicit eigen formulas and a 2x2 algebraic Lyapunov solve
A*S + S*A' + diag(sigma0^2, sigma^2) = 0.  The Lyapunov route is
authoritative near a degenerate spectrum, where the eigen formulas have a
removable singularity.  In the joint limit t -> infinity then
sigma, theta -> infinity with alpha = sigma^2/theta fixed, the covariance
collapses to

    Var z0  -> sigma0^2 / (2 h0 V''(y0e)),
    Var zb  -> sigma0^2 / (2 h0 V''(y0e)) + sigma^2 / (2 theta),
    Cov     -> sigma0^2 / (2 h0 V''(y0e)).

All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import DegenerateSpectrumError, InstabilityError
from .grids import write_csv_atomic
from .model import ModelParams
from .potential import DOUBLE_WELL

__all__ = [
    "DriftMatrix",
    "EigenStructure",
    "CovarianceReport",
    "TerminalCovariance",
    "build_drift",
    "eigen_decompose",
    "stationary_covariance",
    "asymptotic_limits",
    "covariance_at_time",
    "terminal_covariance_h0_zero",
    "covariance_sweep_rows",
    "write_sweep_csv",
]

#: Spectra with discriminant below this are treated as degenerate.
DEGENERATE_DISCRIMINANT = 1e-12


@dataclass(frozen=True)
class DriftMatrix:
    """Drift matrix of the linearized pair; a12 = theta0, a21 = theta."""

    a11: float
    a12: float
    a21: float
    a22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21


@dataclass(frozen=True)
class EigenStructure:
    """A = Q diag(lambda1, lambda2) Q^-1 with lambda1 >= lambda2."""

    lambda1: float
    lambda2: float
    q: np.ndarray
    q_inv: np.ndarray


@dataclass(frozen=True)
class CovarianceReport:
    """Stationary second moments of (z0, zbar) and their large-theta limits."""

    var_z0: float
    var_zbar: float
    cov: float
    limit_var_z0: float
    limit_var_zbar: float
    limit_cov: float


@dataclass(frozen=True)
class TerminalCovariance:
    """Exact covariance of the h0 = 0 linear pair at time T, and its large-T
    rank-one approximation (both include the 1/N factor)."""

    exact: np.ndarray
    rank_one: np.ndarray


def build_drift(params: ModelParams, y0e: float) -> DriftMatrix:
    """Drift matrix of the fluctuation pair linearized at ``y0e``."""
    v2 = DOUBLE_WELL.eval_derivative(2, y0e)
    return DriftMatrix(
        a11=-params.h0 * v2 - params.theta0,
        a12=params.theta0,
        a21=params.theta,
        a22=-params.theta,
    )


def eigen_decompose(m: DriftMatrix) -> EigenStructure:
    """Closed-form eigen-decomposition of the drift matrix.

    Raises :class:`DegenerateSpectrumError` when the discriminant falls below
    ``DEGENERATE_DISCRIMINANT``; callers must then use an integral route.
    """
    s = -(m.a11 + m.a22)
    disc = s * s - 4.0 * m.det
    if disc <= DEGENERATE_DISCRIMINANT:
        raise DegenerateSpectrumError(
            f"eigenvalue discriminant {disc:.3e} is below {DEGENERATE_DISCRIMINANT:.0e}"
        )
    root = math.sqrt(disc)
    lam1 = 0.5 * (-s + root)
    lam2 = 0.5 * (-s - root)
    theta = m.a21
    if theta > 0.0:
        q1 = 1.0 + lam1 / theta
        q2 = 1.0 + lam2 / theta
        q = (theta / (lam1 - lam2)) * np.array([[q1, q2], [1.0, 1.0]])
        q_inv = np.array([[1.0, -q2], [-1.0, q1]])
    else:
        # theta = 0 decouples the local mean; use a direct 2x2 eigen solve.
        lams, vecs = np.linalg.eig(m.as_array())
        order = np.argsort(lams)[::-1]
        lams, vecs = lams[order].real, vecs[:, order].real
        lam1, lam2 = float(lams[0]), float(lams[1])
        q = vecs
        q_inv = np.linalg.inv(vecs)
    return EigenStructure(lambda1=lam1, lambda2=lam2, q=q, q_inv=q_inv)


def _require_stable(m: DriftMatrix):
    if not (m.trace < 0.0 and m.det > 0.0):
        raise InstabilityError(
            f"drift matrix is not contracting (trace {m.trace:.3g}, det {m.det:.3g})"
        )


def _noise_matrix(params: ModelParams) -> np.ndarray:
    return np.diag([params.sigma0**2, params.sigma**2])


def _lyapunov_covariance(m: DriftMatrix, params: ModelParams) -> np.ndarray:
    return scipy.linalg.solve_continuous_lyapunov(m.as_array(), -_noise_matrix(params))


def _eigen_covariance(eig: EigenStructure, params: ModelParams) -> tuple[float, float, float]:
    """Stationary (var_z0, var_zbar, cov) from the explicit eigen formulas."""
    lam1, lam2 = eig.lambda1, eig.lambda2
    q1 = eig.q[0, 0] / eig.q[1, 0]
    q2 = eig.q[0, 1] / eig.q[1, 1]
    s0sq, ssq = params.sigma0**2, params.sigma**2
    pref = 1.0 / ((q1 - q2) ** 2)
    b11 = s0sq + ssq * q2 * q2
    b12 = s0sq + ssq * q1 * q2
    b22 = s0sq + ssq * q1 * q1
    var_z0 = pref * (
        -(q1 * q1 * b11) / (2.0 * lam1)
        + (2.0 / (lam1 + lam2)) * q1 * q2 * b12
        - (q2 * q2 * b22) / (2.0 * lam2)
    )
    var_zb = pref * (
        -b11 / (2.0 * lam1) + (2.0 / (lam1 + lam2)) * b12 - b22 / (2.0 * lam2)
    )
    cov = pref * (
        -(q1 * b11) / (2.0 * lam1)
        + ((q1 + q2) / (lam1 + lam2)) * b12
        - (q2 * b22) / (2.0 * lam2)
    )
    return var_z0, var_zb, cov


def asymptotic_limits(params: ModelParams, y0e: float) -> tuple[float, float, float]:
    """Large-theta limits (var_z0, var_zbar, cov) at fixed alpha = sigma^2/theta.

    For h0 = 0 the limits exist only in the noiseless-central case sigma0 = 0
    (all three first entries vanish); with sigma0 > 0 they diverge.
    """
    v2 = DOUBLE_WELL.eval_derivative(2, y0e)
    alpha_half = params.sigma**2 / (2.0 * params.theta) if params.theta > 0 else math.inf
    if params.h0 > 0.0 and v2 > 0.0:
        base = params.sigma0**2 / (2.0 * params.h0 * v2)
    elif params.sigma0 == 0.0:
        base = 0.0
    else:
        base = math.inf
    return base, base + alpha_half, base


def stationary_covariance(params: ModelParams, y0e: float) -> CovarianceReport:
    """Exact t -> infinity covariance of (z0, zbar), with the limit values.

    Requires a contracting drift (h0, theta0, theta > 0 suffices); otherwise
    raises :class:`InstabilityError`.  The eigen closed forms are
    cross-checked against the algebraic Lyapunov solve; near a degenerate
    spectrum only the Lyapunov route is used.
    """
    m = build_drift(params, y0e)
    _require_stable(m)
    sigma = _lyapunov_covariance(m, params)
    var_z0, var_zb, cov = sigma[0, 0], sigma[1, 1], sigma[0, 1]
    try:
        eig = eigen_decompose(m)
    except DegenerateSpectrumError:
        pass
    else:
        cf = _eigen_covariance(eig, params)
        scale = max(abs(var_z0), abs(var_zb), abs(cov), 1e-300)
        if max(abs(cf[0] - var_z0), abs(cf[1] - var_zb), abs(cf[2] - cov)) > 1e-6 * scale:
            raise AssertionError(
                "eigen closed form and Lyapunov solve disagree: "
                f"{cf} vs {(var_z0, var_zb, cov)}"
            )
        var_z0, var_zb, cov = cf
    limits = asymptotic_limits(params, y0e)
    return CovarianceReport(
        var_z0=var_z0,
        var_zbar=var_zb,
        cov=cov,
        limit_var_z0=limits[0],
        limit_var_zbar=limits[1],
        limit_cov=limits[2],
    )


def _phi(c: float, t: float) -> float:
    """int_0^t e^{c u} du, stable for small c*t."""
    x = c * t
    if abs(x) < 1e-12:
        return t * (1.0 + 0.5 * x)
    return math.expm1(x) / c


def covariance_at_time(params: ModelParams, y0e: float, t: float) -> np.ndarray:
    """Covariance matrix of (z0(t), zbar(t)) started from a deterministic state.

    Uses the eigen closed form; falls back to adaptive quadrature of
    e^{uA} D e^{uA'} when the spectrum is degenerate.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0.0:
        return np.zeros((2, 2))
    m = build_drift(params, y0e)
    d = _noise_matrix(params)
    try:
        eig = eigen_decompose(m)
    except DegenerateSpectrumError:
        a = m.as_array()

        def integrand(u):
            e = scipy.linalg.expm(u * a)
            return (e @ d @ e.T).ravel()

        value, _ = scipy.integrate.quad_vec(integrand, 0.0, t, epsabs=1e-12, epsrel=1e-11)
        return value.reshape(2, 2)
    b = eig.q_inv @ d @ eig.q_inv.T
    lams = (eig.lambda1, eig.lambda2)
    g = np.array(
        [[b[i, j] * _phi(lams[i] + lams[j], t) for j in (0, 1)] for i in (0, 1)]
    )
    return eig.q @ g @ eig.q.T


def terminal_covariance_h0_zero(params: ModelParams, t_final: float) -> TerminalCovariance:
    """Exact covariance of (x0(T), xbar(T)) for the h0 = h = 0 linear pair.

    Includes the 1/N factor.  Also returns the large-T rank-one
    approximation (T/N) * (theta^2 sigma0^2 + theta0^2 sigma^2) /
    (theta0 + theta)^2 * [[1, 1], [1, 1]], which shows the two coordinates
    becoming perfectly correlated.
    """
    if params.h0 != 0.0:
        raise ValueError(f"requires h0 = 0, got h0 = {params.h0}")
    if params.h != 0.0:
        raise ValueError(f"requires h = 0, got h = {params.h}")
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    th0, th = params.theta0, params.theta
    s0sq, ssq = params.sigma0**2, params.sigma**2
    tbar = th0 + th
    if th <= 0 or tbar <= 0:
        raise ValueError("requires theta > 0")
    q0 = (th / tbar) * np.array([[1.0, -th0 / th], [1.0, 1.0]])
    decay = math.exp(-t_final * tbar)
    inner = np.array(
        [
            [
                t_final * (s0sq + th0**2 * ssq / th**2),
                (-s0sq + th0 * ssq / th) * (1.0 - decay) / tbar,
            ],
            [
                (-s0sq + th0 * ssq / th) * (1.0 - decay) / tbar,
                (s0sq + ssq) * (1.0 - decay * decay) / (2.0 * tbar),
            ],
        ]
    )
    exact = q0 @ inner @ q0.T / params.n_agents
    coef = t_final * (th**2 * s0sq + th0**2 * ssq) / (tbar**2 * params.n_agents)
    rank_one = coef * np.ones((2, 2))
    return TerminalCovariance(exact=exact, rank_one=rank_one)


def covariance_sweep_rows(base: ModelParams, name: str, values, y0e: float = -1.0):
    """Stationary covariance report for ``name`` swept over ``values``.

    Returns a list of dicts with keys matching the sweep CSV header.
    """
    rows = []
    for value in values:
        params = base.with_(**{name: float(value)})
        rep = stationary_covariance(params, y0e)
        rows.append(
            {
                "param_swept": name,
                "value": float(value),
                "var_z0": rep.var_z0,
                "var_zbar": rep.var_zbar,
                "cov": rep.cov,
                "limit_var_z0": rep.limit_var_z0,
                "limit_var_zbar": rep.limit_var_zbar,
                "limit_cov": rep.limit_cov,
            }
        )
    return rows


def write_sweep_csv(path, rows) -> None:
    header = "param_swept,value,var_z0,var_zbar,cov,limit_var_z0,limit_var_zbar,limit_cov"
    lines = [header]
    for r in rows:
        lines.append(
            ",".join(
                [r["param_swept"]]
                + [
                    f"{r[k]:.17g}"
                    for k in (
                        "value",
                        "var_z0",
                        "var_zbar",
                        "cov",
                        "limit_var_z0",
                        "limit_var_zbar",
                        "limit_cov",
                    )
                ]
            )
        )
    write_csv_atomic(path, "\n".join(lines) + "\n")
