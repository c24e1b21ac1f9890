"""Truncated Taylor series ("jets") for forward-mode differentiation.

A :class:`Jet` of order ``k`` stores the normalized Taylor coefficients
``c[m] = f^(m)(x0) / m!`` for ``m = 0..k``.  Coefficients may be numpy arrays,
so a single jet evaluates derivatives at a whole grid of base points.
"""

from __future__ import annotations

import math

import numpy as np


class Jet:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, x, order: int) -> "Jet":
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order: int, shape=()) -> "Jet":
        c = np.zeros((order + 1,) + tuple(shape))
        c[0] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def value(self):
        return self.c[0]

    def derivative(self, m: int):
        """m-th derivative at the base point."""
        return self.c[m] * math.factorial(m)

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            return self.c[: k + 1], other.c[: k + 1]
        c = np.zeros_like(self.c)
        c[0] = other
        return self.c, c

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a - b)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(b - a)

    def __neg__(self):
        return Jet(-self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self._coerce(other)
        out = np.zeros_like(a * b)
        for k in range(a.shape[0]):
            out[k] = sum(a[j] * b[k - j] for j in range(k + 1))
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        u, v = self._coerce(other)
        q = np.zeros_like(u / v[0])
        for k in range(u.shape[0]):
            q[k] = (u[k] - sum(v[j] * q[k - j] for j in range(1, k + 1))) / v[0]
        return Jet(q)

    def __rtruediv__(self, other):
        return Jet.constant(other, self.order, np.shape(self.c[0])) / self

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = Jet.constant(1.0, self.order, np.shape(self.c[0]))
        for _ in range(n):
            out = out * self
        return out

    # -- calculus on the series -------------------------------------------

    def diff(self) -> "Jet":
        """Series of the derivative; one order lower."""
        k = np.arange(1, self.order + 1).reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(self.c[1:] * k)

    def integrate(self, value) -> "Jet":
        """Antiderivative series with prescribed constant term; one order higher."""
        k = np.arange(1, self.order + 2).reshape((-1,) + (1,) * (self.c.ndim - 1))
        c = np.zeros((self.order + 2,) + self.c.shape[1:])
        c[0] = value
        c[1:] = self.c / k
        return Jet(c)

    def __repr__(self):
        return f"Jet({self.c!r})"


# -- elementary functions working on floats, arrays and jets ---------------


def sin(x):
    if isinstance(x, Jet):
        return _sincos(x)[0]
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return _sincos(x)[1]
    return np.cos(x)


def _sincos(x: Jet):
    a = x.c
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0], c[0] = np.sin(a[0]), np.cos(a[0])
    for k in range(1, a.shape[0]):
        s[k] = sum(j * a[j] * c[k - j] for j in range(1, k + 1)) / k
        c[k] = -sum(j * a[j] * s[k - j] for j in range(1, k + 1)) / k
    return Jet(s), Jet(c)


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    a = x.c
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for k in range(1, a.shape[0]):
        e[k] = sum(j * a[j] * e[k - j] for j in range(1, k + 1)) / k
    return Jet(e)


def atan2(y, x):
    """Angle of the vector (x, y); continuous along the jet direction."""
    if not isinstance(y, Jet) and not isinstance(x, Jet):
        return np.arctan2(y, x)
    order = y.order if isinstance(y, Jet) else x.order
    shape = np.shape(y.value if isinstance(y, Jet) else x.value)
    if not isinstance(y, Jet):
        y = Jet.constant(y, order, shape)
    if not isinstance(x, Jet):
        x = Jet.constant(x, order, shape)
    theta0 = np.arctan2(y.value, x.value)
    if order == 0:
        return Jet.constant(theta0, 0, shape)
    xr = Jet(x.c[:order])
    yr = Jet(y.c[:order])
    rate = (xr * y.diff() - yr * x.diff()) / (xr * xr + yr * yr)
    return rate.integrate(theta0)


def floor(x):
    """Floor of the base value; locally constant so all derivatives vanish."""
    if isinstance(x, Jet):
        return Jet.constant(np.floor(x.value), x.order, np.shape(x.value))
    return np.floor(x)


def value(x):
    return x.value if isinstance(x, Jet) else x
