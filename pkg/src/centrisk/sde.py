"""Seeded Euler-Maruyama simulation of the agent system.

Three simulators share the same conventions:

* ``simulate_full``       -- the (N+1)-dimensional system: central agent x0
                             plus N local agents, any h >= 0.
* ``simulate_reduced``    -- the exact 2-d reduction (x0, xbar) valid at
                             h = 0, with noises sigma0/sqrt(N), sigma/sqrt(N).
* ``simulate_controlled`` -- the reduced system with the stationary optimal
                             feedback added to the local-mean drift.

Noise comes from a counter-based Philox generator, so the seed fully
determines every Brownian increment regardless of thread scheduling.  A
single path is advanced sequentially; independent replicas should use
``replica r = f(seed, r)`` via the ``replica`` argument, which keys a
disjoint Philox stream, making ensemble results independent of execution
order.  Diffusion coefficients are constant, so Euler-Maruyama is already
exact in the diffusion term (no Milstein correction exists).

The state is checked for finiteness at every step; a blow-up aborts with
:class:`DivergenceError` rather than clamping, which would corrupt variance
estimates.  All paths start from the normal state (every coordinate -1)
unless overridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .grids import PathGrid
from .model import ModelParams, SimConfig

__all__ = [
    "FeedbackLaw",
    "make_generator",
    "simulate_full",
    "simulate_reduced",
    "simulate_controlled",
    "controlled_mean_drift",
    "count_transitions",
    "scaled_fluctuations",
    "stationary_second_moments",
]

_NOISE_CHUNK = 16384


@dataclass(frozen=True)
class FeedbackLaw:
    """Steady-state feedback coefficients consumed by ``simulate_controlled``.

    The per-agent control -theta_c*(b_inf*X0 + d_inf*Xj + e_inf*Xbar) acts on
    the mean as -theta_c*(b_inf*X0 + (d_inf + e_inf)*Xbar), in coordinates
    shifted by +1 around the normal state.
    """

    b_inf: float
    d_inf: float
    e_inf: float
    theta_c: float


def make_generator(seed: int, replica: int | None = None) -> np.random.Generator:
    """Philox generator for ``seed``; ``replica`` selects a disjoint stream."""
    if replica is None:
        seq = np.random.SeedSequence(entropy=seed)
    else:
        seq = np.random.SeedSequence(entropy=seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(seq))


def _check_finite(x0: float, xbar: float, step: int, dt: float):
    if not (math.isfinite(x0) and math.isfinite(xbar)):
        raise DivergenceError(
            f"state became non-finite at step {step} (t = {step * dt:.6g}); "
            "reduce dt",
            step=step,
            time=step * dt,
        )


def simulate_reduced(
    params: ModelParams,
    cfg: SimConfig,
    replica: int | None = None,
    x0_init: float = -1.0,
    xbar_init: float = -1.0,
) -> PathGrid:
    """Euler-Maruyama path of the exact (x0, xbar) reduction at h = 0."""
    if params.h != 0.0:
        raise ValueError(f"the 2-d reduction is exact only for h = 0, got h = {params.h}")
    return _reduced_loop(params, cfg, None, replica, x0_init, xbar_init)


def simulate_controlled(
    params: ModelParams,
    cfg: SimConfig,
    law: FeedbackLaw,
    replica: int | None = None,
    x0_init: float = -1.0,
    xbar_init: float = -1.0,
) -> PathGrid:
    """Reduced simulation with the stationary optimal control on the mean.

    Adds the drift -theta_c*(b_inf*(x0+1) + (d_inf+e_inf)*(xbar+1)) to the
    local-mean equation and records it as the series ``control``.  With the
    zero law the path is bit-identical to ``simulate_reduced``.
    """
    if params.h != 0.0:
        raise ValueError(f"the 2-d reduction is exact only for h = 0, got h = {params.h}")
    return _reduced_loop(params, cfg, law, replica, x0_init, xbar_init)


def controlled_mean_drift(params: ModelParams, law: FeedbackLaw, x0: float, xbar: float) -> float:
    """Total drift of the local mean under the feedback law (noise excluded)."""
    passive = -params.theta * (xbar - x0)
    active = -law.theta_c * (law.b_inf * (x0 + 1.0) + (law.d_inf + law.e_inf) * (xbar + 1.0))
    return passive + active


def _reduced_loop(params, cfg, law, replica, x0_init, xbar_init):
    n = cfg.n_steps
    dt = cfg.dt
    sqrt_dt = math.sqrt(dt)
    root_n = math.sqrt(params.n_agents)
    amp0 = params.sigma0 / root_n * sqrt_dt
    amp1 = params.sigma / root_n * sqrt_dt
    h0, th0, th = params.h0, params.theta0, params.theta
    rng = make_generator(cfg.seed, replica)

    x0, xb = float(x0_init), float(xbar_init)
    out0 = np.empty(n + 1)
    outb = np.empty(n + 1)
    out0[0], outb[0] = x0, xb
    if law is not None:
        tc, b, de = law.theta_c, law.b_inf, law.d_inf + law.e_inf
        ctrl = np.empty(n + 1)
        ctrl[0] = -tc * (b * (x0 + 1.0) + de * (xb + 1.0))

    i = 0
    while i < n:
        m = min(_NOISE_CHUNK, n - i)
        noise = rng.standard_normal((m, 2))
        n0 = noise[:, 0].tolist()
        n1 = noise[:, 1].tolist()
        for k in range(m):
            drift0 = -h0 * (x0 * x0 * x0 - x0) - th0 * (x0 - xb)
            driftb = -th * (xb - x0)
            if law is None:
                x0 = x0 + drift0 * dt + amp0 * n0[k]
                xb = xb + driftb * dt + amp1 * n1[k]
            else:
                u = -tc * (b * (x0 + 1.0) + de * (xb + 1.0))
                x0 = x0 + drift0 * dt + amp0 * n0[k]
                xb = xb + driftb * dt + amp1 * n1[k] + u * dt
            i += 1
            if not (math.isfinite(x0) and math.isfinite(xb)):
                _check_finite(x0, xb, i, dt)
            out0[i] = x0
            outb[i] = xb
            if law is not None:
                ctrl[i] = -tc * (b * (x0 + 1.0) + de * (xb + 1.0))

    t = np.linspace(0.0, n * dt, n + 1)
    series = {"x0": out0, "xbar": outb}
    if law is not None:
        series["control"] = ctrl
    return PathGrid(t, series)


def simulate_full(
    params: ModelParams,
    cfg: SimConfig,
    record_agents: tuple[int, ...] = (),
    replica: int | None = None,
    x0_init: float = -1.0,
    agent_init: float = -1.0,
) -> PathGrid:
    """Euler-Maruyama path of the full (N+1)-agent system (any h >= 0).

    The recorded series always include ``x0`` and ``xbar`` (the arithmetic
    mean of the agents at each step); ``record_agents`` adds individual
    series named ``x<j>``.  The central noise is scaled by sigma0/sqrt(N);
    each local agent carries noise of strength sigma.
    """
    for j in record_agents:
        if not 0 <= j < params.n_agents:
            raise ValueError(f"agent index {j} out of range 0..{params.n_agents - 1}")
    n = cfg.n_steps
    dt = cfg.dt
    sqrt_dt = math.sqrt(dt)
    amp0 = params.sigma0 / math.sqrt(params.n_agents) * sqrt_dt
    amp = params.sigma * sqrt_dt
    h0, h, th0, th = params.h0, params.h, params.theta0, params.theta
    rng = make_generator(cfg.seed, replica)

    x0 = float(x0_init)
    x = np.full(params.n_agents, float(agent_init))
    out0 = np.empty(n + 1)
    outb = np.empty(n + 1)
    agents = {j: np.empty(n + 1) for j in record_agents}
    out0[0] = x0
    outb[0] = float(np.mean(x))
    for j in record_agents:
        agents[j][0] = x[j]

    rows = max(1, _NOISE_CHUNK // (params.n_agents + 1))
    i = 0
    while i < n:
        m = min(rows, n - i)
        noise = rng.standard_normal((m, params.n_agents + 1))
        for k in range(m):
            xbar = x.mean()
            drift0 = -h0 * (x0 * x0 * x0 - x0) - th0 * (x0 - xbar)
            if h != 0.0:
                drift = -h * (x * x * x - x) - th * (x - x0)
            else:
                drift = -th * (x - x0)
            x0 = x0 + drift0 * dt + amp0 * noise[k, 0]
            x = x + drift * dt + amp * noise[k, 1:]
            i += 1
            if not (math.isfinite(x0) and np.isfinite(x).all()):
                raise DivergenceError(
                    f"state became non-finite at step {i} (t = {i * dt:.6g}); reduce dt",
                    step=i,
                    time=i * dt,
                )
            out0[i] = x0
            outb[i] = x.mean()
            for j in record_agents:
                agents[j][i] = x[j]

    t = np.linspace(0.0, n * dt, n + 1)
    series = {"x0": out0, "xbar": outb}
    for j in record_agents:
        series[f"x{j}"] = agents[j]
    return PathGrid(t, series)


def count_transitions(series, band: float = 0.5) -> int:
    """Number of regime flips of ``series`` across 0 with hysteresis ``band``.

    A flip from the low regime is registered when the series exceeds +band,
    and from the high regime when it drops below -band.  The starting regime
    is the sign of the first sample.
    """
    values = np.asarray(series, dtype=float)
    regime = -1 if values[0] <= 0 else 1
    count = 0
    for v in values:
        if regime < 0 and v > band:
            regime = 1
            count += 1
        elif regime > 0 and v < -band:
            regime = -1
            count += 1
    return count


def scaled_fluctuations(grid: PathGrid, n_agents: int, equilibrium: float = -1.0):
    """sqrt(N)-scaled deviations of (x0, xbar) from the equilibrium value."""
    root_n = math.sqrt(n_agents)
    return (
        root_n * (grid["x0"] - equilibrium),
        root_n * (grid["xbar"] - equilibrium),
    )


def stationary_second_moments(
    a,
    b,
    burn_in_fraction: float = 0.1,
    n_batches: int = 32,
):
    """Sample variances/covariance after burn-in, with batch-means errors.

    Returns a dict with keys ``var_a``, ``var_b``, ``cov`` and matching
    ``se_*`` standard errors.  The series are centered with their global
    post-burn-in means; the standard error of each second moment is the
    batch-means estimate over ``n_batches`` contiguous batches.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    start = int(len(a) * burn_in_fraction)
    a = a[start:]
    b = b[start:]
    if len(a) < 2 * n_batches:
        raise ValueError("series too short for the requested number of batches")
    mu_a, mu_b = a.mean(), b.mean()
    da, db = a - mu_a, b - mu_b
    prods = {"var_a": da * da, "var_b": db * db, "cov": da * db}
    out = {}
    usable = (len(a) // n_batches) * n_batches
    for name, series in prods.items():
        out[name] = float(series.mean())
        batches = series[:usable].reshape(n_batches, -1).mean(axis=1)
        out["se_" + name] = float(batches.std(ddof=1) / math.sqrt(n_batches))
    return out
