"""Translation and rotation numbers, periodic-orbit certificates and
semi-conjugacy checks.

The error bound used throughout is the a priori ``1/N``: for a degree-one
lift the function ``x -> F^N(x) - x - N tau`` has absolute value below one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import CircleMap, Compose, Lift, Mobius, Rotation, as_mobius, circle_point

MAX_ITERATIONS = 100_000_000
CERT_TOL = 1e-9


class IterationBudgetError(RuntimeError):
    pass


@dataclass
class RotationEstimate:
    value: float
    error_bound: float
    iterations: int
    witness_x: float
    translation: float = 0.0  # unreduced tau of the lift


@dataclass
class RationalCertificate:
    p: int
    q: int
    orbit: list
    residual: float
    tangential: bool = False

    def as_fraction(self) -> Fraction:
        return Fraction(self.p, self.q)


def iterate_lift(lift: Lift, x0: float, n: int) -> float:
    """``F^n(x0)`` using closed forms where the map has them."""
    m = lift.map
    if isinstance(m, Rotation):
        return x0 + n * (m.alpha - lift.k)
    mob = as_mobius(m)
    if mob is not None and mob.kind() != "hyperbolic":
        # elliptic/parabolic powers have polynomially bounded entries
        return float(mob.power(n)(x0)) - n * lift.k
    f = lift.scalar()
    # keep the fractional part small so long orbits do not lose precision
    x, turns = float(x0), 0
    for _ in range(n):
        x = f(x)
        j = math.floor(x)
        if j:
            x -= j
            turns += j
    return x + turns


def translation_number(lift: Lift, iterations: int, x0: float = 0.0) -> RotationEstimate:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if iterations > MAX_ITERATIONS:
        raise IterationBudgetError(f"{iterations} exceeds the budget of {MAX_ITERATIONS}")
    m = lift.map
    if isinstance(m, Rotation):
        tau = m.alpha - lift.k
    else:
        tau = (iterate_lift(lift, x0, iterations) - x0) / iterations
    return RotationEstimate(circle_point(tau), 1.0 / iterations, iterations, float(x0), tau)


def rotation_number(expr: CircleMap, iterations: int = 100_000, x0: float = 0.0) -> RotationEstimate:
    return translation_number(Lift(expr), iterations, x0)


def rotation_numbers(exprs, iterations: int = 100_000, threads: int = 1) -> list[RotationEstimate]:
    """Batch version; results are ordered by input index."""
    exprs = list(exprs)
    if threads <= 1:
        return [rotation_number(e, iterations) for e in exprs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda e: rotation_number(e, iterations), exprs))


def circle_diff(a: float, b: float) -> float:
    """Distance between ``a`` and ``b`` in R/Z."""
    d = (a - b) % 1.0
    return min(d, 1.0 - d)


def candidate_fractions(value: float, max_q: int, radius: float) -> list[Fraction]:
    """Reduced ``p/q`` in [0, 1) with ``q <= max_q`` within ``radius`` of ``value`` on R/Z.

    This contains every continued-fraction convergent of ``value`` that is
    that close; the full window also catches estimates sitting just on the
    wrong side of a convergent.
    """
    out = []
    for q in range(1, max_q + 1):
        lo = math.floor((value - radius) * q)
        hi = math.ceil((value + radius) * q)
        for p in range(lo, hi + 1):
            if math.gcd(p, q) != 1 and not (p == 0 and q == 1):
                continue
            if circle_diff(p / q, value) <= radius:
                fr = Fraction(p % q, q)
                if fr not in out:
                    out.append(fr)
    return sorted(out, key=lambda fr: (fr.denominator, fr.numerator))


def _power_map(expr: CircleMap, q: int) -> CircleMap:
    mob = as_mobius(expr)
    if mob is not None:
        return mob.power(q)
    if isinstance(expr, Rotation):
        return Rotation(q * expr.alpha)
    return Compose((expr,) * q)


def _isolate(G, n_grid: int, tol: float):
    """Zero of a 1-periodic ``G`` on [0, 1): sign change first, then tangential."""
    xs = np.linspace(0.0, 1.0, n_grid, endpoint=False)
    vals = G(xs)
    nxt = np.roll(vals, -1)
    nxt[-1] = G(1.0)
    hits = np.nonzero(vals == 0.0)[0]
    if hits.size:
        return float(xs[hits[0]]), 0.0, False
    changes = np.nonzero(np.sign(vals) != np.sign(nxt))[0]
    if changes.size:
        i = changes[0]
        root = brentq(G, xs[i], xs[i] + 1.0 / n_grid, xtol=1e-15)
        return root, abs(float(G(root))), False
    i = int(np.argmin(np.abs(vals)))
    h = 1.0 / n_grid
    res = minimize_scalar(lambda x: abs(float(G(x))), bounds=(xs[i] - h, xs[i] + h),
                          method="bounded", options={"xatol": 1e-14})
    x = float(res.x) if abs(float(G(res.x))) < abs(vals[i]) else float(xs[i])
    r = abs(float(G(x)))
    if r <= tol:
        return x, r, True
    return None


def detect_rational(expr: CircleMap, max_q: int = 20, tol: float = CERT_TOL,
                    n_grid: int = 1000, iterations: int | None = None):
    """Certify ``rho = p/q`` by a periodic orbit, or return ``None``."""
    if max_q < 1:
        raise ValueError("max_q must be >= 1")
    lift = Lift(expr)
    n = iterations or 4 * max_q * max_q + 1000
    est = translation_number(lift, n)
    grid = 4 * max_q * n_grid
    for fr in candidate_fractions(est.value, max_q, 1.0 / n):
        q = fr.denominator
        Fq = _power_map(expr, q)
        # integer part of the unreduced translation of the q-th power
        shift = Lift(expr).k * q
        target = q * est.translation
        for P in sorted({math.floor(target), math.ceil(target), round(target)},
                        key=lambda P: abs(P - target)):
            if (P - fr.numerator) % q:
                continue

            def G(x, Fq=Fq, P=P, shift=shift):
                return Fq.disp(x) - shift - P

            found = _isolate(G, grid, tol)
            if found is None:
                continue
            x, r, tangential = found
            if r > tol:
                continue
            orbit, y = [], x
            f = lift.scalar()
            for _ in range(q):
                orbit.append(circle_point(y))
                y = f(y)
            if q > 1 and min(circle_diff(a, b) for i, a in enumerate(orbit)
                             for b in orbit[i + 1:]) < 1e-12:
                continue
            return RationalCertificate(fr.numerator, q, orbit, max(r, 0.0), tangential)
    return None


@dataclass
class SemiconjugacyReport:
    rho_f: float
    rho_g: float
    delta_rho: float
    conjugacy_residual: float
    bound: float
    ok: bool
    notes: list = field(default_factory=list)


def _check_degree_one(h, xs, tol=1e-9):
    hx = np.asarray(h(xs), dtype=float)
    if np.any(np.diff(hx) < -tol):
        raise ValueError("h is not monotone")
    if np.max(np.abs(np.asarray(h(xs + 1.0)) - hx - 1.0)) > tol:
        raise ValueError("h is not of degree one")
    return hx


def check_semiconjugacy_invariance(f: CircleMap, h, g: CircleMap, tol: float = 1e-6,
                                   iterations: int = 10_000, n_grid: int = 1000) -> SemiconjugacyReport:
    """Compare ``rho(f)`` and ``rho(g)`` for a proposed ``h o f = g o h``."""
    xs = np.linspace(0.0, 1.0, n_grid, endpoint=False)
    hx = _check_degree_one(h, xs)
    lhs = np.asarray(h(f(xs)), dtype=float)
    rhs = np.asarray(g(hx), dtype=float)
    d = np.mod(lhs - rhs, 1.0)
    resid = float(np.max(np.minimum(d, 1.0 - d)))
    rf = rotation_number(f, iterations)
    rg = rotation_number(g, iterations)
    dr = circle_diff(rf.value, rg.value)
    bound = 2.0 / iterations + resid
    notes = []
    if resid > tol:
        notes.append(f"h o f and g o h differ by {resid:.3g} > tol")
    ok = dr <= bound and resid <= tol
    if dr > bound:
        notes.append("rotation numbers differ beyond the a priori bound")
    return SemiconjugacyReport(rf.value, rg.value, dr, resid, bound, ok, notes)
