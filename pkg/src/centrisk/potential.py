"""The bistable quartic potential shared by every other module.

V(x) = x**4/4 - x**2/2 has stable states at x = -1 (normal) and x = +1
(failed), separated by a local maximum at 0.  Useful fixed values:
V'(+-1) = 0, V''(+-1) = 2, V''(0) = -1, and the fourth derivative is the
constant 6.

The potential is hard coded rather than user supplied: every closed form in
the package (equilibrium shifts, linearized stiffness, boundary-value
coefficients) assumes this exact quartic.  All functions are pure and safe
to call concurrently.
"""

import numpy as np

__all__ = ["QuarticDoubleWell", "DOUBLE_WELL"]


class QuarticDoubleWell:
    """Evaluation of V and its derivatives up to order four.

    Accepts scalars or numpy arrays; returns the same shape.  Derivatives of
    order five and higher vanish identically and are not offered.
    """

    stable_states = (-1.0, 1.0)

    def __call__(self, x):
        return self.eval_derivative(0, x)

    def eval_derivative(self, order, x):
        """Return d^k V / dx^k at ``x`` for ``order`` k in 0..4."""
        if order not in (0, 1, 2, 3, 4):
            raise ValueError(f"derivative order must be in 0..4, got {order!r}")
        x = np.asarray(x, dtype=float)
        if order == 0:
            out = 0.25 * x**4 - 0.5 * x**2
        elif order == 1:
            out = x**3 - x
        elif order == 2:
            out = 3.0 * x**2 - 1.0
        elif order == 3:
            out = 6.0 * x
        else:
            out = np.full_like(x, 6.0)
        return out if out.ndim else float(out)


DOUBLE_WELL = QuarticDoubleWell()
