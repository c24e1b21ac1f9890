"""Expression trees for circle diffeomorphisms and local interval maps.

Every node evaluates a real function on floats, numpy arrays, and
:class:`~circlegroups.jets.Jet` objects.  Circle maps (``is_circle = True``)
evaluate a *lift*: a strictly increasing map of the line commuting with
``x -> x + 1``.  The circle is R/Z and the projective line is identified with
it through ``x -> span(cos(pi x), sin(pi x))``.

Beyond plain evaluation nodes provide cancellation-free variants that the
renormalization code depends on:

``disp(x)``        ``F(x) - x``
``delta(y, d)``    ``F(y + d) - F(y)``
``disp_deriv(x)``  ``F'(x) - 1``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import jets
from .jets import Jet
from .ode import FlowExitError, integrate

PI = math.pi
INVERT_TOL = 1e-12


class InversionError(RuntimeError):
    pass


class CircleMap:
    """Base node.  Subclasses implement ``_f`` generically (arrays and jets)."""

    is_circle = True

    # -- evaluation -------------------------------------------------------

    def __call__(self, x):
        if isinstance(x, Jet):
            return self.jet(x)
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input")
        out = self._f(x)
        return float(out) if np.ndim(out) == 0 else out

    def _f(self, x):
        raise NotImplementedError

    def jet(self, x: Jet) -> Jet:
        return self._f(x)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = self.jet(Jet.variable(x, 1)).c[1]
        return float(out) if np.ndim(out) == 0 else out

    def derivatives(self, x, order: int):
        """Array ``[F(x), F'(x), ..., F^(order)(x)]``."""
        j = self.jet(Jet.variable(np.asarray(x, dtype=float), order))
        return np.array([j.derivative(m) for m in range(order + 1)])

    def disp(self, x):
        return self(x) - np.asarray(x, dtype=float)

    def disp_deriv(self, x):
        return self.deriv(x) - 1.0

    def delta(self, y, d):
        y = np.asarray(y, dtype=float)
        return self(y + d) - self(y)

    # -- inverses ---------------------------------------------------------

    def inverse(self) -> "CircleMap":
        return Inverse(self)

    def invert_at(self, y, tol: float = INVERT_TOL, max_iter: int = 200):
        return invert_monotone(self, y, tol=tol, max_iter=max_iter,
                               periodic=self.is_circle)

    def power(self, n: int) -> "CircleMap":
        return Power(self, n)

    def scalar(self):
        """Fast float -> float closure for long iterations."""
        return lambda x: float(self._f(np.float64(x)))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __matmul__(self, other):
        return Compose((self, other))


# -- numerical inversion ----------------------------------------------------


def invert_monotone(F: CircleMap, y, tol: float = INVERT_TOL, max_iter: int = 200,
                    periodic: bool = True):
    """Solve ``F(x) = y`` by monotone bracketing then safeguarded Newton.

    For degree-one lifts the bracket is grown by unit steps; for local maps
    a pure Newton iteration from ``y - disp(y)`` is used.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    x = y - np.asarray(F.disp(y), dtype=float)
    if periodic:
        lo, hi = x - 0.5, x + 0.5
        for _ in range(64):
            bad = F(lo) > y
            if not np.any(bad):
                break
            lo = np.where(bad, lo - 1.0, lo)
        for _ in range(64):
            bad = F(hi) < y
            if not np.any(bad):
                break
            hi = np.where(bad, hi + 1.0, hi)
        x = np.clip(x, lo, hi)
    for _ in range(max_iter):
        r = np.atleast_1d(F(x)) - y
        if np.all(np.abs(r) <= tol):
            # one Newton polish: quadratic convergence takes it to round-off
            dr = np.atleast_1d(F.deriv(x))
            x = x - np.where(dr > 0, r / np.where(dr > 0, dr, 1.0), 0.0)
            break
        dr = np.atleast_1d(F.deriv(x))
        step = np.where(dr > 0, r / np.where(dr > 0, dr, 1.0), 0.0)
        xn = x - step
        if periodic:
            lo = np.where(r < 0, x, lo)
            hi = np.where(r > 0, x, hi)
            outside = (xn <= lo) | (xn >= hi) | (dr <= 0)
            xn = np.where(outside, 0.5 * (lo + hi), xn)
        x = np.where(np.abs(r) <= tol, x, xn)
    else:
        r = np.atleast_1d(F(x)) - y
        if np.any(np.abs(r) > tol):
            raise InversionError(
                f"inversion tolerance {tol:g} not reached (residual {np.max(np.abs(r)):.3g})")
    return float(x[0]) if scalar else x


# -- leaf maps ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Rotation(CircleMap):
    alpha: float

    def _f(self, x):
        return x + self.alpha

    def deriv(self, x):
        return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0

    def disp(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.alpha) if np.ndim(x) else self.alpha

    def disp_deriv(self, x):
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0

    def delta(self, y, d):
        return d + 0.0 * np.asarray(y, dtype=float)

    def inverse(self):
        return Rotation(-self.alpha)

    def invert_at(self, y, tol=INVERT_TOL, max_iter=0):
        return y - self.alpha

    def power(self, n):
        return Rotation(n * self.alpha)

    def scalar(self):
        a = self.alpha
        return lambda x: x + a

    def to_dict(self):
        return {"type": "rotation", "alpha": self.alpha}


@dataclass(frozen=True, eq=False)
class PerturbedRotation(CircleMap):
    """``x -> x + alpha + eps/(2 pi k) sin(2 pi k x)`` with ``|eps| < 1``."""

    alpha: float
    eps: float
    k: int = 1

    def __post_init__(self):
        if not abs(self.eps) < 1:
            raise ValueError("|eps| must be < 1 for an orientation-preserving diffeomorphism")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")

    def _f(self, x):
        w = 2 * PI * self.k
        return x + self.alpha + self.eps / w * jets.sin(w * x)

    def deriv(self, x):
        return 1.0 + self.eps * np.cos(2 * PI * self.k * np.asarray(x, dtype=float))

    def disp(self, x):
        w = 2 * PI * self.k
        return self.alpha + self.eps / w * np.sin(w * np.asarray(x, dtype=float))

    def disp_deriv(self, x):
        return self.eps * np.cos(2 * PI * self.k * np.asarray(x, dtype=float))

    def delta(self, y, d):
        y = np.asarray(y, dtype=float)
        return d + self.eps / (PI * self.k) * np.cos(PI * self.k * (2 * y + d)) * np.sin(PI * self.k * d)

    def scalar(self):
        a, c, w, sin = self.alpha, self.eps / (2 * PI * self.k), 2 * PI * self.k, math.sin
        return lambda x: x + a + c * sin(w * x)

    def to_dict(self):
        return {"type": "perturbed_rotation", "alpha": self.alpha, "eps": self.eps, "k": self.k}


def _normalize_matrix(a, b, c, d):
    det = a * d - b * c
    if not det > 0:
        raise ValueError("Mobius matrix must have positive determinant")
    s = math.sqrt(det)
    return (a / s, b / s, c / s, d / s)


class Mobius(CircleMap):
    """PSL(2,R) acting on the projective line, read in the circle chart.

    The lift is the continuous branch of ``angle(A v(x)) / pi`` with
    ``v(x) = (cos pi x, sin pi x)``; ``shift = 0`` gives ``F(0)`` in [0, 1).
    """

    def __init__(self, a, b, c, d, shift: int = 0, _unit: bool = False):
        # products of unit-determinant matrices skip the determinant check,
        # which cancels catastrophically for long hyperbolic words
        self.m = (float(a), float(b), float(c), float(d)) if _unit \
            else _normalize_matrix(float(a), float(b), float(c), float(d))
        self.shift = int(shift)
        a, b, c, d = self.m
        phi = math.atan2(c, a)
        self._r = math.hypot(a, c)
        self._s = (a * b + c * d) / self._r
        self._c0 = phi / PI - math.floor(phi / PI) + self.shift

    @classmethod
    def hyperbolic(cls, attractor: float, repeller: float, multiplier: float) -> "Mobius":
        """Hyperbolic element with the given fixed points and derivative ``multiplier < 1``
        at the attractor."""
        if not 0 < multiplier < 1:
            raise ValueError("multiplier must lie in (0, 1)")
        p = np.array([[math.cos(PI * attractor), math.cos(PI * repeller)],
                      [math.sin(PI * attractor), math.sin(PI * repeller)]])
        e = math.sqrt(multiplier)
        m = p @ np.diag([1.0 / e, e]) @ np.linalg.inv(p)
        return cls(*m.ravel())

    @property
    def trace(self):
        return self.m[0] + self.m[3]

    def kind(self, tol: float = 1e-12) -> str:
        t = abs(self.trace)
        if t < 2 - tol:
            return "elliptic"
        if t > 2 + tol:
            return "hyperbolic"
        return "parabolic"

    def _f(self, x):
        n = jets.floor(x)
        u = (x - n) * PI
        su, cu = jets.sin(u), jets.cos(u)
        r, s = self._r, self._s
        return n + jets.atan2(su / r, cu * r + su * s) / PI + self._c0

    def _image(self, x):
        a, b, c, d = self.m
        cs, sn = np.cos(PI * x), np.sin(PI * x)
        return a * cs + b * sn, c * cs + d * sn, cs, sn

    def deriv(self, x):
        u, w, _, _ = self._image(np.asarray(x, dtype=float))
        return 1.0 / (u * u + w * w)

    def disp(self, x):
        x = np.asarray(x, dtype=float)
        a, b, c, d = self.m
        cs, sn = np.cos(PI * x), np.sin(PI * x)
        cross = c * cs * cs + (d - a) * cs * sn - b * sn * sn
        dot = a * cs * cs + (b + c) * cs * sn + d * sn * sn
        q = np.arctan2(cross, dot) / PI
        rough = self._f(x) - x
        return q + np.round(rough - q)

    def disp_deriv(self, x):
        u, w, _, _ = self._image(np.asarray(x, dtype=float))
        n2 = u * u + w * w
        return (1.0 - n2) / n2

    def delta(self, y, d):
        y = np.asarray(y, dtype=float)
        u1, w1, _, _ = self._image(y)
        u2, w2, _, _ = self._image(y + d)
        q = np.arctan2(np.sin(PI * d), u1 * u2 + w1 * w2) / PI
        rough = self._f(y + d) - self._f(y)
        return q + np.round(rough - q)

    def _canon(self, x):
        return self._f(np.float64(x)) - self.shift

    def compose(self, other: "Mobius") -> "Mobius":
        """Lift composition ``self o other`` as a single node."""
        a, b, c, d = self.m
        e, f, g, h = other.m
        prod = Mobius(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h, _unit=True)
        k = round(self._canon(other._canon(0.0)) - prod._canon(0.0))
        return Mobius(*prod.m, shift=self.shift + other.shift + k, _unit=True)

    def inverse(self):
        a, b, c, d = self.m
        inv = Mobius(d, -b, -c, a, _unit=True)
        y0 = float(self._f(np.float64(0.0)))
        return Mobius(d, -b, -c, a, shift=-round(float(inv._f(np.float64(y0)))), _unit=True)

    def invert_at(self, y, tol=INVERT_TOL, max_iter=0):
        return self.inverse()(y)

    def power(self, n: int):
        n = int(n)
        base = self if n >= 0 else self.inverse()
        result = Mobius(1, 0, 0, 1)
        n = abs(n)
        while n:
            if n & 1:
                result = result.compose(base)
            base = base.compose(base)
            n >>= 1
        return result

    def fixed_points(self) -> list[float]:
        """Fixed points on the circle, in [0, 1)."""
        a, b, c, d = self.m
        # eigenvectors of A give fixed lines
        vals, vecs = np.linalg.eig(np.array([[a, b], [c, d]]))
        out = []
        for i in range(2):
            if abs(vals[i].imag) > 1e-14:
                continue
            v = vecs[:, i].real
            out.append((math.atan2(v[1], v[0]) / PI) % 1.0)
        out = sorted(set(round(p, 15) % 1.0 for p in out))
        return out

    def scalar(self):
        a, b, c, d = self.m
        r, s, c0 = self._r, self._s, self._c0
        sin, cos, atan2, floor = math.sin, math.cos, math.atan2, math.floor

        def f(x):
            n = floor(x)
            u = (x - n) * PI
            su = sin(u)
            return n + atan2(su / r, cos(u) * r + su * s) / PI + c0

        return f

    def to_dict(self):
        out = {"type": "mobius", "matrix": list(self.m)}
        if self.shift:
            out["shift"] = self.shift
        return out

    def __repr__(self):
        return f"Mobius({', '.join(f'{v:.6g}' for v in self.m)}, shift={self.shift})"


@dataclass(frozen=True, eq=False)
class Cover(CircleMap):
    """Lift of a circle map to the ``fold``-sheeted cover: ``x -> F(m x) / m``."""

    base: CircleMap
    fold: int = 2

    def _f(self, x):
        return self.base.jet(x * self.fold) * (1.0 / self.fold) if isinstance(x, Jet) \
            else self.base(x * self.fold) / self.fold

    def deriv(self, x):
        return self.base.deriv(np.asarray(x, dtype=float) * self.fold)

    def disp(self, x):
        return self.base.disp(np.asarray(x, dtype=float) * self.fold) / self.fold

    def delta(self, y, d):
        return self.base.delta(np.asarray(y, dtype=float) * self.fold, d * self.fold) / self.fold

    def inverse(self):
        return Cover(self.base.inverse(), self.fold)

    def scalar(self):
        f, m = self.base.scalar(), self.fold
        return lambda x: f(x * m) / m

    def to_dict(self):
        return {"type": "cover", "fold": self.fold, "of": self.base.to_dict()}


# -- C-infinity bump fields and their time maps ------------------------------


@dataclass(frozen=True)
class BumpField:
    """``X(x) = speed * exp(4/L^2 - 1/((x-a)(b-x)))`` on ``(a, b)``, zero elsewhere.

    The field is flat at both ends of the support, so its time maps are C^inf
    circle diffeomorphisms that are not analytic.  ``speed`` is the maximum
    of ``X`` (attained at the midpoint).
    """

    a: float
    b: float
    speed: float = 0.05

    def __post_init__(self):
        if not 0 < self.b - self.a < 1:
            raise ValueError("bump support must be an arc of length in (0, 1)")

    @property
    def length(self):
        return self.b - self.a

    def _log(self, s):
        return math.log(self.speed) + 4.0 / self.length ** 2 - 1.0 / ((s - self.a) * (self.b - s))

    def log_value(self, s):
        """``log X(s)`` for ``s`` strictly inside the support."""
        return self._log(np.asarray(s, dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = self.a + np.mod(x - self.a, 1.0)
        inside = s < self.b
        out = np.zeros_like(s)
        if np.any(inside):
            out[inside] = np.exp(self._log(s[inside]))
        return float(out) if out.ndim == 0 else out

    def jet(self, s: Jet) -> Jet:
        return jets.exp(self._log(s))

    def derivatives_at(self, x, order: int):
        """Derivatives of ``X`` up to ``order``; all zero outside the support."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = self.a + np.mod(x - self.a, 1.0)
        inside = (s > self.a) & (s < self.b)
        out = np.zeros((order + 1, x.size))
        if np.any(inside):
            j = self.jet(Jet.variable(s[inside], order))
            for m in range(order + 1):
                out[m, inside] = j.derivative(m)
        return out


@dataclass(frozen=True, eq=False)
class BumpFlowTime(CircleMap):
    """Time-``t`` map of a :class:`BumpField`."""

    field: BumpField
    t: float
    atol: float = 1e-13

    def _reduce(self, x):
        x = np.asarray(x, dtype=float)
        s = self.field.a + np.mod(x - self.field.a, 1.0)
        inside = (s > self.field.a) & (s < self.field.b)
        return s, inside

    def _flow(self, s):
        fld = self.field
        # exit is impossible: the field vanishes to infinite order at both ends
        return integrate(fld, s, self.t, atol=self.atol,
                         h0=min(abs(self.t), 0.05 * fld.length / fld.speed))

    def disp(self, x):
        s, inside = self._reduce(x)
        out = np.zeros_like(s)
        if np.any(inside) and self.t != 0:
            out[inside] = self._flow(s[inside]) - s[inside]
        return float(out) if out.ndim == 0 else out

    def _f(self, x):
        if isinstance(x, Jet):
            return self.jet(x)
        return x + self.disp(x)

    def deriv(self, x):
        s, inside = self._reduce(x)
        out = np.ones_like(s)
        if np.any(inside) and self.t != 0:
            y = self._flow(s[inside])
            # 1-d autonomous flows: d(phi^t)/dx = X(phi^t(x)) / X(x)
            out[inside] = np.exp(self.field.log_value(y) - self.field.log_value(s[inside]))
        return float(out) if out.ndim == 0 else out

    def jet(self, x: Jet) -> Jet:
        x0 = np.atleast_1d(x.value)
        shape = np.shape(x.value)
        order = x.order
        s, inside = self._reduce(x0)
        # series of y(eps) = phi^t(s0 + eps), from y' = X(y) / X(s0 + eps)
        c = np.zeros((order + 1, x0.size))
        c[0] = x0 + self.disp(x0)
        if order >= 1:
            c[1] = 1.0
        if np.any(inside) and order >= 1:
            s_in = s[inside]
            y0 = self._flow(s_in)
            src = Jet.variable(s_in, order - 1)
            inv_src = 1.0 / self.field.jet(src)
            y = Jet.constant(y0, order, y0.shape)
            for _ in range(order):
                rate = self.field.jet(Jet(y.c[:order])) * inv_src
                y = rate.integrate(y0)
            c[1:, inside] = y.c[1:]
        inner = Jet(c.reshape((order + 1,) + shape))
        # compose with the incoming series x(eps)
        return _compose_series(inner, x)

    def inverse(self):
        return BumpFlowTime(self.field, -self.t, self.atol)

    def power(self, n):
        return BumpFlowTime(self.field, n * self.t, self.atol)

    def to_dict(self):
        return {"type": "bump_flow", "support": [self.field.a, self.field.b],
                "time": self.t, "speed": self.field.speed}


def _compose_series(outer: Jet, inner: Jet) -> Jet:
    """Taylor series of ``P(q(eps) - q(0))`` where ``outer`` holds P's coefficients."""
    order = min(outer.order, inner.order)
    q = Jet(inner.c[: order + 1].copy())
    q.c[0] = 0.0
    out = Jet.constant(0.0, order, np.shape(inner.value))
    power = Jet.constant(1.0, order, np.shape(inner.value))
    for m in range(order + 1):
        out = out + power * outer.c[m]
        power = power * q
    return out


# -- composite nodes ---------------------------------------------------------


class Compose(CircleMap):
    """``items[0] o items[1] o ... o items[-1]``; the last item acts first."""

    def __init__(self, items):
        self.items = tuple(items)

    @property
    def is_circle(self):
        return all(e.is_circle for e in self.items)

    def _f(self, x):
        for e in reversed(self.items):
            x = e.jet(x) if isinstance(x, Jet) else e(x)
        return x

    def _orbit(self, x):
        pts = [np.asarray(x, dtype=float)]
        for e in reversed(self.items[1:]):
            pts.append(np.asarray(e(pts[-1]), dtype=float))
        return pts

    def deriv(self, x):
        pts = self._orbit(x)
        out = 1.0
        for e, p in zip(reversed(self.items), pts):
            out = out * e.deriv(p)
        return out

    def disp(self, x):
        pts = self._orbit(x)
        out = 0.0
        for e, p in zip(reversed(self.items), pts):
            out = out + e.disp(p)
        if not self.items:
            out = np.zeros_like(np.asarray(x, dtype=float))
        return out

    def delta(self, y, d):
        y = np.asarray(y, dtype=float)
        for e in reversed(self.items):
            d = e.delta(y, d)
            y = np.asarray(e(y), dtype=float)
        return d

    def inverse(self):
        return Compose(e.inverse() for e in reversed(self.items))

    def scalar(self):
        fs = [e.scalar() for e in reversed(self.items)]

        def f(x):
            for g in fs:
                x = g(x)
            return x

        return f

    def to_dict(self):
        return {"type": "compose", "items": [e.to_dict() for e in self.items]}


class Conjugate(Compose):
    """``U^-1 o G o U`` with a displacement computed without cancellation."""

    def __init__(self, outer: CircleMap, inner: CircleMap):
        self.outer, self.inner = outer, inner
        self.outer_inv = outer.inverse()
        super().__init__((self.outer_inv, inner, outer))

    def disp(self, x):
        y = np.asarray(self.outer(x), dtype=float)
        return self.outer_inv.delta(y, self.inner.disp(y))

    def disp_deriv(self, x):
        x = np.asarray(x, dtype=float)
        y = np.asarray(self.outer(x), dtype=float)
        dx = self.disp(x)
        u1 = self.outer.deriv(x)
        u2 = self.outer.deriv(x + dx)
        ratio_m1 = (u1 - u2) / u2
        dg = self.inner.disp_deriv(y)
        return ratio_m1 * (1.0 + dg) + dg


class Inverse(CircleMap):
    def __init__(self, base: CircleMap):
        self.base = base

    @property
    def is_circle(self):
        return self.base.is_circle

    def _f(self, x):
        if isinstance(x, Jet):
            return self.jet(x)
        return self.base.invert_at(x)

    def jet(self, y: Jet) -> Jet:
        x0 = self.base.invert_at(y.value)
        d0 = self.base.deriv(x0)
        x = Jet.constant(x0, y.order, np.shape(x0))
        for _ in range(y.order + 1):
            x = x - (self.base.jet(x) - y) * (1.0 / d0)
        return x

    def deriv(self, x):
        return 1.0 / self.base.deriv(self.base.invert_at(x))

    def disp(self, x):
        return -self.base.disp(self.base.invert_at(x))

    def delta(self, y, d):
        x1 = np.asarray(self.base.invert_at(y), dtype=float)
        step = d / self.base.deriv(x1)
        for _ in range(60):
            r = self.base.delta(x1, step) - d
            new = step - r / self.base.deriv(x1 + step)
            if np.all(np.abs(new - step) <= 1e-15 * (np.abs(step) + 1e-300)):
                step = new
                break
            step = new
        return step

    def inverse(self):
        return self.base

    def invert_at(self, y, tol=INVERT_TOL, max_iter=0):
        return self.base(y)

    def scalar(self):
        f = self.base.scalar()
        base = self.base

        def g(y):
            x = y - float(base.disp(y))
            for _ in range(100):
                r = f(x) - y
                if abs(r) <= 1e-13:
                    return x
                x -= r / float(base.deriv(x))
            return x

        return g

    def to_dict(self):
        return {"type": "inverse", "of": self.base.to_dict()}


class Power(CircleMap):
    """``base^n``; closed forms are used when the base provides one."""

    def __init__(self, base: CircleMap, n: int):
        self.base, self.n = base, int(n)
        closed = type(base).power is not CircleMap.power
        if closed:
            self._impl = base.power(self.n)
        else:
            step = base if self.n >= 0 else base.inverse()
            self._impl = Compose((step,) * abs(self.n))

    @property
    def is_circle(self):
        return self.base.is_circle

    def _f(self, x):
        return self._impl.jet(x) if isinstance(x, Jet) else self._impl(x)

    def deriv(self, x):
        return self._impl.deriv(x)

    def disp(self, x):
        return self._impl.disp(x)

    def disp_deriv(self, x):
        return self._impl.disp_deriv(x)

    def delta(self, y, d):
        return self._impl.delta(y, d)

    def inverse(self):
        return Power(self.base, -self.n)

    def invert_at(self, y, tol=INVERT_TOL, max_iter=200):
        return self._impl.invert_at(y, tol=tol)

    def power(self, m):
        return Power(self.base, self.n * m)

    def scalar(self):
        return self._impl.scalar()

    def to_dict(self):
        return {"type": "power", "of": self.base.to_dict(), "n": self.n}


# -- local maps of an interval (germs) ---------------------------------------


class LocalMap(CircleMap):
    is_circle = False


@dataclass(frozen=True, eq=False)
class Linear(LocalMap):
    lam: float

    def _f(self, x):
        return x * self.lam

    def deriv(self, x):
        return self.lam + 0.0 * np.asarray(x, dtype=float)

    def disp(self, x):
        return (self.lam - 1.0) * np.asarray(x, dtype=float)

    def disp_deriv(self, x):
        return self.lam - 1.0 + 0.0 * np.asarray(x, dtype=float)

    def delta(self, y, d):
        return self.lam * d + 0.0 * np.asarray(y, dtype=float)

    def inverse(self):
        return Linear(1.0 / self.lam)

    def invert_at(self, y, tol=INVERT_TOL, max_iter=0):
        return np.asarray(y, dtype=float) / self.lam

    def power(self, n):
        return Linear(self.lam ** n)

    def to_dict(self):
        return {"type": "linear", "lambda": self.lam}


@dataclass(frozen=True, eq=False)
class Affine(LocalMap):
    """``x -> x + slope_m1 * x + shift`` with the slope stored minus one."""

    slope_m1: float
    shift: float

    @classmethod
    def flow_of_linear_field(cls, alpha: float, beta: float, t: float) -> "Affine":
        """Time-``t`` map of the field ``alpha + beta x``."""
        if beta == 0:
            return cls(0.0, alpha * t)
        s = math.expm1(beta * t)
        return cls(s, alpha * s / beta)

    def _f(self, x):
        return x + x * self.slope_m1 + self.shift

    def deriv(self, x):
        return 1.0 + self.slope_m1 + 0.0 * np.asarray(x, dtype=float)

    def disp(self, x):
        return self.slope_m1 * np.asarray(x, dtype=float) + self.shift

    def disp_deriv(self, x):
        return self.slope_m1 + 0.0 * np.asarray(x, dtype=float)

    def delta(self, y, d):
        return (1.0 + self.slope_m1) * d + 0.0 * np.asarray(y, dtype=float)

    def inverse(self):
        a = 1.0 + self.slope_m1
        return Affine(-self.slope_m1 / a, -self.shift / a)

    def invert_at(self, y, tol=INVERT_TOL, max_iter=0):
        return (np.asarray(y, dtype=float) - self.shift) / (1.0 + self.slope_m1)

    def power(self, n):
        if self.slope_m1 == 0:
            return Affine(0.0, n * self.shift)
        s = math.expm1(n * math.log1p(self.slope_m1))
        return Affine(s, self.shift * s / self.slope_m1)

    def to_dict(self):
        return {"type": "affine", "slope_minus_one": self.slope_m1, "shift": self.shift}


class LineMobius(LocalMap):
    """Real Mobius map of the line, ``x -> (a x + b) / (c x + d)``."""

    def __init__(self, a, b, c, d):
        if not a * d - b * c > 0:
            raise ValueError("determinant must be positive")
        self.m = (float(a), float(b), float(c), float(d))

    def _f(self, x):
        a, b, c, d = self.m
        return (x * a + b) / (x * c + d)

    def deriv(self, x):
        a, b, c, d = self.m
        x = np.asarray(x, dtype=float)
        return (a * d - b * c) / (c * x + d) ** 2

    def disp(self, x):
        a, b, c, d = self.m
        x = np.asarray(x, dtype=float)
        return (-c * x * x + (a - d) * x + b) / (c * x + d)

    def delta(self, y, dd):
        a, b, c, d = self.m
        y = np.asarray(y, dtype=float)
        return dd * (a * d - b * c) / ((c * (y + dd) + d) * (c * y + d))

    def inverse(self):
        a, b, c, d = self.m
        return LineMobius(d, -b, -c, a)

    def invert_at(self, y, tol=INVERT_TOL, max_iter=0):
        return self.inverse()(y)

    def power(self, n):
        a, b, c, d = self.m
        base = np.array([[a, b], [c, d]]) if n >= 0 else np.array([[d, -b], [-c, a]])
        m = np.linalg.matrix_power(base, abs(int(n)))
        return LineMobius(*m.ravel())

    def to_dict(self):
        return {"type": "line_mobius", "matrix": list(self.m)}


class Polynomial(LocalMap):
    """``sum coeffs[k] x^k``; a germ when ``coeffs[0] == 0``."""

    def __init__(self, coeffs):
        self.coeffs = tuple(float(c) for c in coeffs)

    def _f(self, x):
        out = 0.0 * x
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = 0.0 * x
        for k in range(len(self.coeffs) - 1, 0, -1):
            out = out * x + k * self.coeffs[k]
        return out

    def _disp_coeffs(self):
        c = list(self.coeffs) + [0.0] * max(0, 2 - len(self.coeffs))
        c[1] -= 1.0
        return c

    def disp(self, x):
        x = np.asarray(x, dtype=float)
        out = 0.0 * x
        for c in reversed(self._disp_coeffs()):
            out = out * x + c
        return out

    def disp_deriv(self, x):
        x = np.asarray(x, dtype=float)
        c = self._disp_coeffs()
        out = 0.0 * x
        for k in range(len(c) - 1, 0, -1):
            out = out * x + k * c[k]
        return out

    def delta(self, y, d):
        y = np.asarray(y, dtype=float)
        out = 0.0 * y
        for k, c in enumerate(self.coeffs):
            if k == 0 or c == 0:
                continue
            # (y+d)^k - y^k = d * sum_i (y+d)^i y^(k-1-i)
            s = sum((y + d) ** i * y ** (k - 1 - i) for i in range(k))
            out = out + c * d * s
        return out

    def invert_at(self, y, tol=INVERT_TOL, max_iter=100):
        return invert_monotone(self, y, tol=tol, max_iter=max_iter, periodic=False)

    def to_dict(self):
        return {"type": "polynomial", "coeffs": list(self.coeffs)}


# -- points, arcs, lifts, words ----------------------------------------------


def circle_point(x: float) -> float:
    """Canonical representative in [0, 1)."""
    r = math.fmod(x, 1.0)
    if r < 0:
        r += 1.0
    return 0.0 if r >= 1.0 else r


def circle_dist(x, y):
    d = np.mod(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), 1.0)
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class Arc:
    """Closed arc ``[start, start + length]`` of the circle, ``0 < length < 1``."""

    start: float
    length: float

    def __post_init__(self):
        if not 0 < self.length < 1:
            raise ValueError("arc length must lie in (0, 1)")
        object.__setattr__(self, "start", circle_point(self.start))

    @classmethod
    def from_endpoints(cls, a: float, b: float) -> "Arc":
        """Arc running counterclockwise from ``a`` to ``b``."""
        return cls(a, (b - a) % 1.0)

    @property
    def end(self):
        return self.start + self.length

    def contains(self, x, margin: float = 0.0):
        rel = np.mod(np.asarray(x, dtype=float) - self.start, 1.0)
        return (rel >= margin) & (rel <= self.length - margin)

    def interior_contains(self, x, margin: float = 1e-6):
        rel = np.mod(np.asarray(x, dtype=float) - self.start, 1.0)
        return (rel > margin) & (rel < self.length - margin)

    def grid(self, n: int):
        return self.start + np.linspace(0.0, self.length, n)


class Lift:
    """A degree-one lift of a circle map, normalized so ``F(0) - offset`` is in [0, 1)."""

    def __init__(self, map: CircleMap, base_offset: int = 0):
        if not map.is_circle:
            raise ValueError("lifts are defined for circle maps only")
        self.map = map
        self.base_offset = int(base_offset)
        self.k = math.floor(float(map(0.0))) - self.base_offset

    def __call__(self, x):
        return self.map(x) - self.k

    def deriv(self, x):
        return self.map.deriv(x)

    def disp(self, x):
        return self.map.disp(x) - self.k

    def invert_at(self, y, tol=INVERT_TOL):
        return self.map.invert_at(np.asarray(y, dtype=float) + self.k, tol=tol)

    def scalar(self):
        f, k = self.map.scalar(), self.k
        return (lambda x: f(x) - k) if k else f


def eval_lift(lift: Lift, x):
    return lift(x)


def derivative(lift: Lift, x):
    return lift.deriv(x)


def invert_at(lift: Lift, y, tol: float = INVERT_TOL):
    return lift.invert_at(y, tol=tol)


Word = tuple  # sequence of (generator index, +1 | -1)


class GroupPresentation:
    def __init__(self, generators, names=None):
        generators = list(generators)
        if not generators:
            raise ValueError("a group needs at least one generator")
        if names is None:
            names = [chr(ord("a") + i) if i < 26 else f"g{i}" for i in range(len(generators))]
        if len(set(names)) != len(names):
            raise ValueError("generator names must be distinct")
        self.generators = tuple(generators)
        self.names = tuple(names)
        self._inverses = [None] * len(self.generators)

    def __len__(self):
        return len(self.generators)

    def letter(self, idx: int, sign: int) -> CircleMap:
        if sign > 0:
            return self.generators[idx]
        if self._inverses[idx] is None:
            self._inverses[idx] = self.generators[idx].inverse()
        return self._inverses[idx]

    def letters(self):
        """All ``(index, sign)`` pairs in a fixed order."""
        return [(i, s) for i in range(len(self)) for s in (1, -1)]

    def word_map(self, word) -> CircleMap:
        word = tuple(word)
        for i, s in word:
            if not 0 <= i < len(self) or s not in (1, -1):
                raise IndexError(f"bad letter {(i, s)}")
        items = []
        for (i, s), run in _runs(word):
            items.append(self.letter(i, s) if run == 1 else Power(self.generators[i], s * run))
        if len(items) == 1:
            return items[0]
        return Compose(items)

    def parse_word(self, text: str) -> Word:
        """Parse ``"f,g,f^-1"`` (or ``"f g f^-1"``) into a word; ``""`` is the identity."""
        out = []
        for tok in text.replace(" ", ",").split(","):
            tok = tok.strip()
            if not tok:
                continue
            name, _, exp = tok.partition("^")
            if name not in self.names:
                raise KeyError(f"unknown generator {name!r}")
            n = int(exp) if exp else 1
            idx = self.names.index(name)
            out.extend([(idx, 1 if n > 0 else -1)] * abs(n))
        return tuple(out)

    def format_word(self, word) -> str:
        """Comma-separated letters; runs of one letter are written as powers."""
        out = []
        for (i, s), run in _runs(word):
            n = s * run
            out.append(self.names[i] + ("" if n == 1 else f"^{n}"))
        return ",".join(out)

    def to_dict(self):
        return {"generators": [dict(name=n, **g.to_dict()) for n, g in zip(self.names, self.generators)]}


def _runs(word):
    """Run-length encoding ``[((i, s), count), ...]`` of a word."""
    out = []
    for letter in word:
        letter = tuple(letter)
        if out and out[-1][0] == letter:
            out[-1][1] += 1
        else:
            out.append([letter, 1])
    return [(l, c) for l, c in out]


def word_to_lift(group: GroupPresentation, word, base_offset: int = 0) -> Lift:
    word = tuple(word)
    if not word:
        return Lift(Compose(()), base_offset)
    return Lift(group.word_map(word), base_offset)


def reduce_word(word) -> Word:
    """Free reduction: cancel adjacent ``x x^-1`` pairs."""
    out = []
    for letter in word:
        if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
            out.pop()
        else:
            out.append(tuple(letter))
    return tuple(out)


def inverse_word(word) -> Word:
    return tuple((i, -s) for i, s in reversed(tuple(word)))


# -- JSON configuration --------------------------------------------------------


def map_from_dict(d: dict) -> CircleMap:
    kind = d.get("type")
    if kind == "mobius":
        return Mobius(*d["matrix"], shift=d.get("shift", 0))
    if kind == "mobius_hyperbolic":
        return Mobius.hyperbolic(d["attractor"], d["repeller"], d["multiplier"])
    if kind == "rotation":
        return Rotation(float(Fraction(str(d["alpha"]))) if isinstance(d["alpha"], str) else d["alpha"])
    if kind == "perturbed_rotation":
        return PerturbedRotation(d["alpha"], d["eps"], d.get("k", 1))
    if kind == "bump_flow":
        a, b = d["support"]
        return BumpFlowTime(BumpField(a, b, d.get("speed", BumpField.speed)), d["time"])
    if kind == "cover":
        return Cover(map_from_dict(d["of"]), d.get("fold", 2))
    if kind == "compose":
        return Compose(map_from_dict(e) for e in d["items"])
    if kind == "inverse":
        return map_from_dict(d["of"]).inverse()
    if kind == "power":
        return Power(map_from_dict(d["of"]), d["n"])
    if kind == "linear":
        return Linear(d["lambda"])
    if kind == "affine":
        return Affine(d["slope_minus_one"], d["shift"])
    if kind == "line_mobius":
        return LineMobius(*d["matrix"])
    if kind == "polynomial":
        return Polynomial(d["coeffs"])
    raise ValueError(f"unknown map type {kind!r}")


def group_from_dict(cfg: dict) -> GroupPresentation:
    gens = cfg.get("generators") or []
    if not gens:
        raise ValueError("configuration lists no generators")
    names = [g.get("name", chr(ord("a") + i)) for i, g in enumerate(gens)]
    return GroupPresentation([map_from_dict(g) for g in gens], names)


@dataclass(frozen=True)
class CirclePoint:
    """A point of R/Z with canonical coordinate in [0, 1)."""

    x: float

    def __post_init__(self):
        object.__setattr__(self, "x", circle_point(float(self.x)))

    def __float__(self):
        return self.x


def as_mobius(expr: CircleMap):
    """Collapse a tree built only from Mobius nodes into one node, else ``None``."""
    if isinstance(expr, Mobius):
        return expr
    if isinstance(expr, Inverse):
        m = as_mobius(expr.base)
        return None if m is None else m.inverse()
    if isinstance(expr, Power):
        m = as_mobius(expr.base)
        return None if m is None else m.power(expr.n)
    if isinstance(expr, Compose) and expr.items:
        out = None
        for e in expr.items:
            m = as_mobius(e)
            if m is None:
                return None
            out = m if out is None else out.compose(m)
        return out
    return None
