"""Parameter records, validation, and flat key=value configuration parsing.

All records are frozen dataclasses: immutable after construction and freely
shareable between threads.  The configuration format is one ``key=value``
per line with ``#`` comments, matching the flat parameter tables used in the
experiments this package reproduces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError

__all__ = [
    "ModelParams",
    "ControlParams",
    "SimConfig",
    "parse_config",
    "format_config",
    "default_horizon",
]

#: Recognized configuration keys, in canonical serialization order.
CONFIG_KEYS = (
    "h0",
    "h",
    "sigma0",
    "sigma",
    "theta0",
    "theta",
    "N",
    "T",
    "dt",
    "seed",
    "burn_in_fraction",
    "theta_c",
    "H0",
)

_REQUIRED = ("h0", "sigma0", "theta0", "sigma", "theta", "N", "T", "dt", "seed")


def _require(cond, message, key):
    if not cond:
        raise ConfigError(message, key=key)


@dataclass(frozen=True)
class ModelParams:
    """Model constants for the coupled central-agent/local-agent system.

    h0      -- intrinsic stability rate of the central agent (>= 0)
    h       -- intrinsic stability rate of the local agents (>= 0)
    sigma0  -- noise strength on the central agent (>= 0)
    sigma   -- noise strength on each local agent (> 0)
    theta0  -- coupling of the central agent toward the local mean (>= 0)
    theta   -- coupling of each local agent toward the central agent (>= 0)
    n_agents-- number of local agents N (>= 1)

    The fluctuation and transition-path modules additionally require h = 0;
    they enforce that at their own entry points.
    """

    h0: float
    h: float
    sigma0: float
    sigma: float
    theta0: float
    theta: float
    n_agents: int

    def __post_init__(self):
        _require(self.h0 >= 0, f"h0 must be >= 0, got {self.h0}", "h0")
        _require(self.h >= 0, f"h must be >= 0, got {self.h}", "h")
        _require(self.sigma0 >= 0, f"sigma0 must be >= 0, got {self.sigma0}", "sigma0")
        _require(self.sigma > 0, f"sigma must be > 0, got {self.sigma}", "sigma")
        _require(self.theta0 >= 0, f"theta0 must be >= 0, got {self.theta0}", "theta0")
        _require(self.theta >= 0, f"theta must be >= 0, got {self.theta}", "theta")
        _require(
            isinstance(self.n_agents, int) and self.n_agents >= 1,
            f"N must be a positive integer, got {self.n_agents}",
            "N",
        )
        for key in ("h0", "h", "sigma0", "sigma", "theta0", "theta"):
            _require(math.isfinite(getattr(self, key)), f"{key} must be finite", key)

    def with_(self, **changes) -> "ModelParams":
        """Copy with the given fields replaced (re-validated)."""
        return replace(self, **changes)


@dataclass(frozen=True)
class ControlParams:
    """Control-problem constants.

    theta_c -- weight of the quadratic control cost/target term (> 0)
    h_cap0  -- linearized stiffness of the central agent around the normal
               state; the drift -h0*V'(x0) linearizes to -h_cap0*(x0+1) with
               the suggested value h_cap0 = 2*h0 (= h0*V''(-1))
    horizon -- Riccati integration horizon T (> 0)
    """

    theta_c: float
    h_cap0: float
    horizon: float

    def __post_init__(self):
        _require(self.theta_c > 0, f"theta_c must be > 0, got {self.theta_c}", "theta_c")
        _require(self.h_cap0 >= 0, f"H0 must be >= 0, got {self.h_cap0}", "H0")
        _require(self.horizon > 0, f"horizon must be > 0, got {self.horizon}", "horizon")


@dataclass(frozen=True)
class SimConfig:
    """Time discretization and reproducibility settings for simulations.

    t_final          -- total simulated time T (> 0)
    dt               -- Euler step (> 0, must divide T)
    seed             -- 64-bit unsigned seed; fully determines all noise paths
    burn_in_fraction -- leading fraction of the path discarded before
                        stationary statistics are computed (default T/10)
    """

    t_final: float
    dt: float
    seed: int
    burn_in_fraction: float = 0.1

    def __post_init__(self):
        _require(self.t_final > 0, f"T must be > 0, got {self.t_final}", "T")
        _require(self.dt > 0, f"dt must be > 0, got {self.dt}", "dt")
        _require(self.dt < self.t_final, "dt must be smaller than T", "dt")
        ratio = self.t_final / self.dt
        _require(
            abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio),
            f"T/dt = {ratio!r} is not an integer within tolerance",
            "dt",
        )
        _require(
            isinstance(self.seed, int) and 0 <= self.seed < 2**64,
            f"seed must be an unsigned 64-bit integer, got {self.seed}",
            "seed",
        )
        _require(
            0.0 <= self.burn_in_fraction < 1.0,
            f"burn_in_fraction must be in [0, 1), got {self.burn_in_fraction}",
            "burn_in_fraction",
        )

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.dt)


def default_horizon(theta_c: float, theta: float) -> float:
    """Riccati horizon long enough for the coefficients to flatten."""
    return 100.0 / min(theta_c, theta if theta > 0 else 1.0, 1.0)


def _parse_value(key, raw):
    raw = raw.strip()
    try:
        if key in ("N", "seed"):
            value = int(raw)
        else:
            value = float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key {key!r}", key=key) from None
    if key not in ("N", "seed") and not math.isfinite(value):
        raise ConfigError(f"value for key {key!r} must be finite, got {raw!r}", key=key)
    return value


def parse_config(text: str):
    """Parse a flat ``key=value`` document.

    Returns ``(ModelParams, SimConfig, ControlParams or None)``.  Unknown
    keys, malformed lines, duplicates, and violated invariants raise
    :class:`~centrisk.errors.ConfigError` naming the offending key.
    ``ControlParams`` is returned only when ``theta_c`` is present; ``H0``
    then defaults to ``2*h0``.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"malformed line {lineno}: {line!r}", key=None)
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r} on line {lineno}", key=key)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} on line {lineno}", key=key)
        values[key] = _parse_value(key, raw)

    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", key=key)
    if "H0" in values and "theta_c" not in values:
        raise ConfigError("H0 given without theta_c", key="H0")

    params = ModelParams(
        h0=values["h0"],
        h=values.get("h", 0.0),
        sigma0=values["sigma0"],
        sigma=values["sigma"],
        theta0=values["theta0"],
        theta=values["theta"],
        n_agents=values["N"],
    )
    sim = SimConfig(
        t_final=values["T"],
        dt=values["dt"],
        seed=values["seed"],
        burn_in_fraction=values.get("burn_in_fraction", 0.1),
    )
    control = None
    if "theta_c" in values:
        control = ControlParams(
            theta_c=values["theta_c"],
            h_cap0=values.get("H0", 2.0 * params.h0),
            horizon=default_horizon(values["theta_c"], params.theta),
        )
    return params, sim, control


def format_config(params: ModelParams, sim: SimConfig, control: ControlParams | None = None) -> str:
    """Serialize records to config text; ``parse_config`` round-trips exactly."""
    lines = [
        f"h0={params.h0!r}",
        f"h={params.h!r}",
        f"sigma0={params.sigma0!r}",
        f"sigma={params.sigma!r}",
        f"theta0={params.theta0!r}",
        f"theta={params.theta!r}",
        f"N={params.n_agents}",
        f"T={sim.t_final!r}",
        f"dt={sim.dt!r}",
        f"seed={sim.seed}",
        f"burn_in_fraction={sim.burn_in_fraction!r}",
    ]
    if control is not None:
        lines.append(f"theta_c={control.theta_c!r}")
        lines.append(f"H0={control.h_cap0!r}")
    return "\n".join(lines) + "\n"
