"""Central-agent mean-field risk model: simulation and analysis toolkit.

A system of N noisy local agents is stabilized only through coupling to a
single central agent sitting in a double-well potential; the central agent
in turn follows the local mean.  This package simulates the system, analyzes
its Gaussian fluctuations around the normal state, computes most probable
transition paths and the exponential smallness of the systemic transition
probability, and builds the linear-quadratic optimal control that stabilizes
the local agents.

Modules
-------
potential     -- the quartic double well and its derivatives
model         -- parameter records and key=value config parsing
grids         -- uniform time grids and CSV export
sde           -- Euler-Maruyama simulators (full, reduced, controlled)
meanfield     -- limit ODEs, stationary density, consistency equation
fluctuations  -- drift matrix, eigen-structure, stationary covariance
ldp           -- action functionals, transition-path boundary value problems
control       -- Riccati integration, algebraic steady states, feedback laws
cli           -- experiment driver writing deterministic CSV artifacts
"""

from .errors import (
    BracketError,
    ConfigError,
    ContinuationError,
    DegenerateSpectrumError,
    DivergenceError,
    InfeasiblePathError,
    InstabilityError,
    NonConvergenceError,
)
from .grids import PathGrid
from .model import ControlParams, ModelParams, SimConfig, format_config, parse_config
from .potential import DOUBLE_WELL, QuarticDoubleWell
from .sde import FeedbackLaw

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "ConfigError",
    "ContinuationError",
    "ControlParams",
    "DegenerateSpectrumError",
    "DivergenceError",
    "DOUBLE_WELL",
    "FeedbackLaw",
    "InfeasiblePathError",
    "InstabilityError",
    "ModelParams",
    "NonConvergenceError",
    "PathGrid",
    "QuarticDoubleWell",
    "SimConfig",
    "format_config",
    "parse_config",
    "__version__",
]
