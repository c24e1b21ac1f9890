"""Flow maps of autonomous scalar ODEs, backed by scipy's Dormand-Prince 5(4).

A whole batch of initial conditions is advanced as one system, so the same time
``t`` is applied to a grid of points with a shared step size.  Leaving the
domain is detected by terminal events and reported with the exit time.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

# scipy refuses relative tolerances below 100 machine epsilons
RTOL = 100 * np.finfo(float).eps


class FlowExitError(RuntimeError):
    """Raised when a trajectory leaves its domain before the requested time."""

    def __init__(self, exit_time: float, message: str | None = None):
        self.exit_time = float(exit_time)
        super().__init__(message or f"trajectory left the domain at t={exit_time:.12g}")


def _exit_events(lo, hi):
    events = []
    if np.isfinite(lo):
        below = lambda s, y: float(np.min(y) - lo)
        events.append(below)
    if np.isfinite(hi):
        above = lambda s, y: float(hi - np.max(y))
        events.append(above)
    for e in events:
        e.terminal = True
    return events


def integrate(rhs, x0, t: float, atol: float = 1e-10, h0: float | None = None,
              domain: tuple[float, float] | None = None, max_step: float = np.inf):
    """Integrate ``dx/ds = rhs(x)`` from ``s = 0`` to ``s = t``.

    ``x0`` may be a scalar or an array; the result has the same shape.  When
    ``domain = (lo, hi)`` is given, leaving it raises :class:`FlowExitError`.
    """
    x = np.array(x0, dtype=float, copy=True)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if t == 0.0:
        return x[0] if scalar else x
    lo, hi = domain if domain is not None else (-np.inf, np.inf)
    if np.any(x < lo) or np.any(x > hi):
        raise FlowExitError(0.0)
    sol = solve_ivp(lambda s, y: rhs(y), (0.0, float(t)), x, method="RK45", rtol=RTOL,
                    atol=atol, first_step=None if h0 is None else min(abs(h0), abs(t)),
                    max_step=max_step, events=_exit_events(lo, hi) or None)
    if sol.status == 1:
        hits = [te[0] for te in sol.t_events if len(te)]
        raise FlowExitError(min(hits, key=abs))
    if sol.status != 0:
        raise RuntimeError(f"integration failed: {sol.message}")
    y = sol.y[:, -1]
    return y[0] if scalar else y
