"""Local analysis at a fixed point: multiplier and Taylor order, Koenigs
linearizing charts, and basins of attraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CircleMap, Inverse
from .jets import Jet

MAX_ORDER = 8


class GermError(ValueError):
    pass


@dataclass
class GermInfo:
    p: float
    multiplier: float
    order: int | None = None  # i in f(x) = x + a (x-p)^(i+1) + ...
    coefficient: float | None = None
    slope_fit: float | None = None
    shift: int = 0  # f(p) = p + shift on the lift

    @property
    def leading_exponent(self):
        return None if self.order is None else self.order + 1

    @property
    def kind(self):
        if self.order is not None:
            return "parabolic"
        return "attracting" if self.multiplier < 1 else "repelling"

    def to_dict(self):
        return {"p": self.p, "multiplier": self.multiplier, "order": self.order,
                "coefficient": self.coefficient, "slope_fit": self.slope_fit}


def _shift_at(f: CircleMap, p: float, tol: float = 1e-12) -> int:
    d = float(f.disp(p))
    k = round(d) if f.is_circle else 0
    if abs(d - k) > tol:
        raise GermError(f"p = {p} is not fixed (f(p) - p = {d:.3g})")
    return k


def germ_info(f: CircleMap, p: float, tol: float = 1e-12) -> GermInfo:
    """Multiplier, and for parabolic germs the order and first nonlinear coefficient."""
    k = _shift_at(f, p, tol)
    lam = float(f.deriv(p))
    if abs(lam - 1.0) > 1e-10:
        return GermInfo(p, lam, shift=k)
    c = f.jet(Jet.variable(np.float64(p), MAX_ORDER)).c
    scale = max(1.0, max(abs(float(v)) for v in c[1:]))
    for m in range(2, MAX_ORDER + 1):
        if abs(float(c[m])) > 1e-10 * scale:
            info = GermInfo(p, lam, order=m - 1, coefficient=float(c[m]), shift=k)
            info.slope_fit = _slope_fit(f, p, k, m, float(c[m]))
            if abs(info.slope_fit - m) > 0.05:
                raise GermError(f"log-log slope {info.slope_fit:.3f} does not match order {m}")
            return info
    raise GermError(f"germ is flat to order {MAX_ORDER}; outside the analytic scope")


def _slope_fit(f, p, k, m, a):
    # radius where the leading term dominates the next few
    r = min(1e-2, 0.1 * abs(a) ** (-1.0 / max(m - 1, 1)))
    h = np.geomspace(r * 1e-2, r, 12)
    d = np.abs(np.asarray(f.disp(p + h), dtype=float) - k)
    ok = d > 0
    return float(np.polyfit(np.log(h[ok]), np.log(d[ok]), 1)[0])


# -- Koenigs charts -------------------------------------------------------------


def _series_coeffs(f: CircleMap, p: float, k: int, order: int):
    """Taylor coefficients of ``z -> f(p + z) - p - k``."""
    c = f.jet(Jet.variable(np.float64(p), order)).c.astype(float).copy()
    c[0] -= p + k
    c[0] = 0.0
    return c


def _poly_compose_powers(a, order):
    """Coefficient table ``P[k][m] = [z^m] (sum_l a_l z^l)^k`` up to ``order``."""
    P = np.zeros((order + 1, order + 1))
    P[0, 0] = 1.0
    for kk in range(1, order + 1):
        P[kk] = np.convolve(P[kk - 1], a)[: order + 1]
    return P


@dataclass
class KoenigsChart:
    center: float
    lam: float
    interval: tuple
    taylor: np.ndarray
    f: CircleMap = field(repr=False)
    inverted: bool = False
    radius_taylor: float = 0.01
    shift: int = 0
    xs: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)

    def _phi_small(self, z):
        out = np.zeros_like(z)
        for b in self.taylor[::-1]:
            out = out * z + b
        return out

    def phi(self, x, max_iter: int = 10_000):
        """``lambda^-n (f^n(x) - p)`` with the tail summed by the Taylor series."""
        x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
        n = np.zeros(x.shape)
        z = x - self.center
        active = np.abs(z) >= self.radius_taylor
        for _ in range(max_iter):
            if not np.any(active):
                break
            z[active] = np.asarray(self.f(self.center + z[active]), dtype=float) - self.center - self.shift
            n[active] += 1
            active = np.abs(z) >= self.radius_taylor
        else:
            raise GermError("iterate did not approach the fixed point")
        return self._phi_small(z) * self.lam ** (-n)

    def phi_inv(self, w, max_iter: int = 10_000):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        n = np.maximum(0, np.ceil(np.log(np.maximum(np.abs(w), 1e-300) / (0.5 * self.radius_taylor))
                                  / -math.log(self.lam))).astype(int)
        n[w == 0] = 0
        target = w * self.lam ** n
        # invert the series by Newton from the linear guess
        z = target.copy()
        dtay = np.polyder(self.taylor[::-1])
        for _ in range(50):
            r = self._phi_small(z) - target
            z = z - r / np.polyval(dtay, z)
            if np.max(np.abs(r)) < 1e-17:
                break
        x = self.center + z
        finv = self.f.inverse()
        for step in range(int(n.max()) if n.size else 0):
            mask = n > step
            x[mask] = np.asarray(finv(x[mask]), dtype=float) + self.shift
        return x

    def defect(self, n_grid: int = 512) -> float:
        """``sup |phi(f(x)) - lambda phi(x)|`` over the chart interval."""
        xs = np.linspace(*self.interval, n_grid)
        fx = np.asarray(self.f(xs), dtype=float) - self.shift
        return float(np.max(np.abs(self.phi(fx) - self.lam * self.phi(xs))))

    def to_rows(self):
        return list(zip(self.xs.tolist(), self.values.tolist()))


def koenigs_chart(f: CircleMap, p: float, radius: float, n_grid: int = 512,
                  order: int = MAX_ORDER, radius_taylor: float = 0.01) -> KoenigsChart:
    """Linearizing coordinate ``phi`` with ``phi(f(x)) = lambda phi(x)`` near ``p``."""
    info = germ_info(f, p)
    lam = info.multiplier
    inverted = False
    if lam > 1:
        f = f.inverse() if not isinstance(f, Inverse) else f.base
        lam = 1.0 / lam
        inverted = True
    if lam >= 1 - 1e-6:
        raise GermError(f"multiplier {lam} too close to 1 for a Koenigs chart")
    k = _shift_at(f, p)
    a = _series_coeffs(f, p, k, order)
    P = _poly_compose_powers(a, order)
    b = np.zeros(order + 1)
    b[1] = 1.0
    for m in range(2, order + 1):
        s = sum(b[kk] * P[kk, m] for kk in range(1, m))
        b[m] = -s / (lam ** m - lam)
    lo, hi = p - radius, p + radius
    lo, hi = _clip_to_basin(f, p, k, lo, hi)
    chart = KoenigsChart(p, lam, (lo, hi), b, f, inverted, radius_taylor, k)
    chart.xs = np.linspace(lo, hi, n_grid)
    chart.values = chart.phi(chart.xs)
    if np.any(np.diff(chart.values) <= 0):
        raise GermError("chart is not monotone on the requested interval")
    return chart


def _clip_to_basin(f, p, k, lo, hi, steps=2000):
    """Shrink ``[lo, hi]`` to points whose iterates approach ``p``."""
    xs = np.linspace(lo, hi, 257)
    z = xs - p
    for _ in range(steps):
        with np.errstate(all="ignore"):
            try:
                z = np.asarray(f(p + z), dtype=float) - p - k
            except ValueError:
                break
        if np.all(np.abs(z) < 1e-3):
            break
    good = np.abs(z) < 1e-3
    i0 = int(np.argmin(np.abs(xs - p)))
    if not good[i0]:
        raise GermError("fixed point is not attracting")
    i, j = i0, i0
    while i > 0 and good[i - 1]:
        i -= 1
    while j < xs.size - 1 and good[j + 1]:
        j += 1
    return float(xs[i]), float(xs[j])


# -- basins ---------------------------------------------------------------------


@dataclass
class Basin:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    @property
    def length(self):
        return self.hi - self.lo

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "lo_closed": self.lo_closed,
                "hi_closed": self.hi_closed}


def basin(f: CircleMap, p: float, domain, n_grid: int = 2001, steps: int = 10_000,
          tol: float = 1e-8, slow_tol: float = 1e-3) -> Basin:
    """Maximal subinterval of ``domain`` around ``p`` whose points iterate to ``p``.

    ``domain`` is ``(lo, hi)`` in lift coordinates.  Parabolic convergence is
    slow (like 1/n); points that approach ``p`` monotonically and end within
    ``slow_tol`` are accepted as converging.
    """
    lo, hi = domain
    k = _shift_at(f, p)
    xs = np.linspace(lo, hi, n_grid)
    if not np.any(np.isclose(xs, p)) and lo <= p <= hi:
        xs = np.sort(np.append(xs, p))
    z = xs - p
    alive = np.ones(xs.size, dtype=bool)
    dist0 = np.abs(z)
    monotone = np.ones(xs.size, dtype=bool)
    prev = dist0.copy()
    for _ in range(steps):
        if not np.any(alive):
            break
        with np.errstate(all="ignore"):
            nz = np.asarray(f(p + z[alive]), dtype=float) - p - k if np.any(alive) else z
        w = np.where(alive)[0]
        z[w] = nz
        inside = (p + z[w] >= lo) & (p + z[w] <= hi) & np.isfinite(z[w])
        alive[w[~inside]] = False
        d = np.abs(z)
        monotone &= (d <= prev + 1e-15) | ~alive
        prev = d
        if np.all(d[alive] <= tol):
            break
    d = np.abs(z)
    conv = alive & ((d <= tol) | (monotone & (d <= slow_tol) & (d < dist0)))
    conv |= np.isclose(xs, p, atol=0)
    i0 = int(np.argmin(np.abs(xs - p)))
    i, j = i0, i0
    while i > 0 and conv[i - 1]:
        i -= 1
    while j < xs.size - 1 and conv[j + 1]:
        j += 1
    # the domain itself is open
    return Basin(float(xs[i]), float(xs[j]), bool(xs[i] > lo), bool(xs[j] < hi))
