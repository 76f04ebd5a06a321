"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration text or parameter value. ``key`` names the offender."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DivergenceError(RuntimeError):
    """A time stepper produced a non-finite state at ``step`` (time ``time``)."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class DegenerateSpectrumError(ValueError):
    """Eigenvalues nearly coincide; closed-form eigen formulas are unusable."""


class InstabilityError(ValueError):
    """Stationary statistics requested for a drift matrix that does not contract."""


class BracketError(ValueError):
    """Root bracket does not change sign."""


class InfeasiblePathError(ValueError):
    """Path violates the drift constraint, so its action is infinite.

    Raised instead of returning ``float('inf')`` so the sentinel can never
    leak into downstream arithmetic.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonConvergenceError(RuntimeError):
    """Newton iteration failed. ``last_state`` is reusable as a continuation seed."""

    def __init__(self, message, last_state=None, residual_norm=None, iterations=None):
        super().__init__(message)
        self.last_state = last_state
        self.residual_norm = residual_norm
        self.iterations = iterations


class ContinuationError(RuntimeError):
    """Continuation could not cross ``interval`` even after step bisection."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval
