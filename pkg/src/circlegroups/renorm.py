"""Renormalization of sequences ``g_n`` converging to the identity into a
limit vector field, and checks that iterates ``g_n^[lambda_n t]`` approximate
its flow.

Every sequence here is a conjugate ``g_n = U_n^-1 o G_n o U_n``; the scaled
displacement ``lambda_n (g_n - id)`` is evaluated through the
cancellation-free ``disp`` of :class:`~circlegroups.core.Conjugate`, which is
what makes exponentially large ``lambda_n`` usable in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .core import Affine, CircleMap, Conjugate, Linear, LocalMap
from .germs import GermError, germ_info
from .jets import Jet
from .ode import FlowExitError, integrate

GRID = 512


class HypothesisError(ValueError):
    pass


class CauchyError(RuntimeError):
    pass


class DivergenceError(RuntimeError):
    pass


# -- vector fields and flows ----------------------------------------------------


@dataclass
class VectorField1D:
    """A field on ``[lo, hi]``: a callable, or samples with a cubic interpolant."""

    lo: float
    hi: float
    func: Callable = field(repr=False)
    xs: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    cauchy: float | None = None

    @classmethod
    def from_samples(cls, xs, values, **kw):
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        return cls(float(xs[0]), float(xs[-1]), CubicSpline(xs, values), xs, values, **kw)

    @classmethod
    def from_callable(cls, func, lo=-np.inf, hi=np.inf, n_grid: int = GRID):
        xs = np.linspace(lo, hi, n_grid) if np.isfinite(lo) and np.isfinite(hi) else None
        vals = None if xs is None else np.asarray(func(xs), dtype=float)
        return cls(lo, hi, func, xs, vals)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def min_abs(self, n_grid: int = GRID) -> float:
        xs = np.linspace(self.lo, self.hi, n_grid)
        return float(np.min(np.abs(self(xs))))

    def nowhere_vanishing(self, a1: float, tol: float = 1e-6) -> bool:
        return self.min_abs() >= a1 - tol

    def to_rows(self):
        return list(zip(self.xs.tolist(), self.values.tolist()))


class LocalFlow:
    """Flow of a :class:`VectorField1D` inside its interval."""

    def __init__(self, field: VectorField1D, atol: float = 1e-10):
        self.field = field
        self.atol = atol

    def __call__(self, x, t):
        dom = None
        if np.isfinite(self.field.lo) or np.isfinite(self.field.hi):
            dom = (self.field.lo, self.field.hi)
        return integrate(self.field, x, t, atol=self.atol, domain=dom)


def flow(field: VectorField1D, x, t: float, tol: float = 1e-10):
    """``phi^t(x)``; raises :class:`FlowExitError` with the exit time on leaving the interval."""
    return LocalFlow(field, atol=tol)(x, t)


# -- sequences --------------------------------------------------------------------


class EulerStep(LocalMap):
    """``x -> x + v(x)/n``."""

    def __init__(self, v, dv, n):
        self.v, self.dv, self.n = v, dv, n

    def _f(self, x):
        if isinstance(x, Jet):
            raise TypeError("EulerStep has no jet")
        return x + np.asarray(self.v(x)) / self.n

    def deriv(self, x):
        return 1.0 + np.asarray(self.dv(np.asarray(x, dtype=float))) / self.n

    def disp(self, x):
        return np.asarray(self.v(np.asarray(x, dtype=float))) / self.n

    def disp_deriv(self, x):
        return np.asarray(self.dv(np.asarray(x, dtype=float))) / self.n

    def to_dict(self):
        return {"type": "euler_step", "n": self.n}


@dataclass
class RenormSequence:
    kind: str
    interval: tuple
    scale: Callable[[int], float]
    parts: Callable[[int], tuple]  # n -> (U or None, G) with g_n = U^-1 G U
    exponents: dict = field(default_factory=dict)
    limit: Callable | None = None
    info: dict = field(default_factory=dict)

    def g(self, n: int) -> CircleMap:
        U, G = self.parts(n)
        return G if U is None else Conjugate(U, G)

    def lam(self, n: int) -> float:
        return self.scale(n)

    def grid(self, n_grid: int = GRID):
        return np.linspace(self.interval[0], self.interval[1], n_grid)

    def scaled(self, n: int, xs):
        return self.scale(n) * np.asarray(self.g(n).disp(xs), dtype=float)

    def scaled_deriv(self, n: int, xs):
        return self.scale(n) * np.asarray(self.g(n).disp_deriv(xs), dtype=float)

    def iterate(self, n: int, m: int, xs):
        """``g_n^m(xs)`` as ``U^-1 G^m U``, with closed-form powers when available."""
        U, G = self.parts(n)
        y = np.asarray(xs, dtype=float) if U is None else np.asarray(U(xs), dtype=float)
        if type(G).power is not CircleMap.power:
            y = np.asarray(G.power(m)(y), dtype=float)
        else:
            for _ in range(m):
                y = np.asarray(G(y), dtype=float)
        return y if U is None else np.asarray(U.inverse()(y), dtype=float)


def _attracting_side(f, p, interval):
    side = 1.0 if 0.5 * (interval[0] + interval[1]) > p else -1.0
    mid = 0.5 * (interval[0] + interval[1])
    return float(f.disp(mid)) * side < 0


def make_nakai_sequence(f: CircleMap, g: CircleMap, p: float = 0.0, interval=(0.2, 1.0),
                        limit=None) -> RenormSequence:
    """Two parabolic germs at ``p`` with leading exponents ``e_f < e_g``.

    ``g_n = f^-n g f^n`` and ``lambda_n = n^((e_g - e_f)/(e_f - 1))``.  The
    exponents stored are the leading exponents of ``f - id`` and ``g - id``.
    """
    fi, gi = germ_info(f, p), germ_info(g, p)
    if fi.order is None:
        raise HypothesisError("f is not tangent to the identity")
    if gi.order is None:
        raise HypothesisError("g is not tangent to the identity")
    e_f, e_g = fi.leading_exponent, gi.leading_exponent
    if e_g <= e_f:
        raise HypothesisError(f"need e_f < e_g, got ({e_f}, {e_g})")
    if not _attracting_side(f, p, interval):
        f = f.inverse()
    expo = (e_g - e_f) / (e_f - 1)
    return RenormSequence(
        "nakai", tuple(interval), lambda n: float(n) ** expo,
        lambda n: (f.power(n), g),
        {"f_leading": e_f, "g_leading": e_g, "scaling": expo}, limit)


def make_hyperbolic_sequence(f: CircleMap, g: CircleMap, p: float = 0.0,
                             interval=(0.25, 0.5)) -> RenormSequence:
    """``f`` hyperbolic at ``p`` (in a linearizing chart), ``g`` tangent to the identity.

    ``g_n = f^-n g f^n`` and ``lambda_n = lambda^(-j n)``.
    """
    fi, gi = germ_info(f, p), germ_info(g, p)
    if fi.order is not None:
        raise HypothesisError("f is not hyperbolic at p")
    if gi.order is None:
        raise HypothesisError("g is not tangent to the identity")
    lam = fi.multiplier
    if lam > 1:
        f, lam = f.inverse(), 1.0 / lam
    j, b = gi.order, gi.coefficient
    limit = None
    if isinstance(f, Linear) and p == 0.0:
        limit = lambda x, b=b, j=j: b * np.asarray(x, dtype=float) ** (j + 1)
    return RenormSequence(
        "hyperbolic", tuple(interval), lambda n: lam ** (-j * n),
        lambda n: (f.power(n), g), {"lambda": lam, "j": j, "b": b}, limit)


def make_conjugation_sequence(f: CircleMap, g: CircleMap, rate: float, interval,
                              limit=None, letters=None) -> RenormSequence:
    """``g_n = f^-n g f^n`` with geometric scale ``lambda_n = rate^n``.

    Used for circle maps where the limit field is known in circle coordinates.
    ``letters`` optionally records the group letters of ``f`` and ``g`` so that
    iterates can be written as genuine words.
    """
    if rate <= 1.0:
        raise ValueError("rate must exceed 1")
    info = {"rate": rate}
    if letters is not None:
        info["letters"] = tuple(tuple(l) for l in letters)
    return RenormSequence("conjugation", tuple(interval), lambda n: rate ** n,
                          lambda n: (f.power(n), g), {"rate": rate}, limit, info)


def make_synthetic_sequence(v, dv, interval=(0.0, 0.5)) -> RenormSequence:
    """``g_n = id + v/n`` with ``lambda_n = n``; the limit field is ``v``."""
    return RenormSequence("synthetic", tuple(interval), float,
                          lambda n: (None, EulerStep(v, dv, n)), {}, v)


# -- flow approximation -------------------------------------------------------------------


@dataclass
class HypothesisReport:
    A1: float
    A2: float
    A3: float
    ok: bool
    rows: list
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"A1": self.A1, "A2": self.A2, "A3": self.A3, "ok": self.ok,
                "rows": self.rows, "notes": self.notes}


def validate_lemma34_hypotheses(seq: RenormSequence, n_list, grid: int = GRID) -> HypothesisReport:
    """Empirical ``A1 <= lambda_n |g_n - id| <= A2`` and ``lambda_n |(g_n - id)'| <= A3``."""
    n_list = list(n_list)
    if not n_list:
        raise ValueError("n_list is empty")
    xs = seq.grid(grid)
    rows = []
    for n in n_list:
        v = np.abs(seq.scaled(n, xs))
        dv = np.abs(seq.scaled_deriv(n, xs))
        rows.append({"n": n, "inf": float(v.min()), "sup": float(v.max()), "sup_deriv": float(dv.max())})
    A1 = min(r["inf"] for r in rows)
    A2 = max(r["sup"] for r in rows)
    A3 = max(r["sup_deriv"] for r in rows)
    notes = []
    infs = [r["inf"] for r in rows]
    sups = [r["sup"] for r in rows]
    if A1 <= 1e-12:
        notes.append("inf is zero")
    if len(rows) > 2:
        if all(b < a for a, b in zip(infs, infs[1:])) and infs[-1] < 0.5 * infs[0]:
            notes.append("inf decays along n_list")
        if all(b > a for a, b in zip(sups, sups[1:])) and sups[-1] > 2.0 * sups[0]:
            notes.append("sup grows along n_list")
    return HypothesisReport(A1, A2, A3, not notes, rows, notes)


def limit_vector_field(seq: RenormSequence, n: int, grid: int = GRID,
                       cauchy_tol: float | None = None) -> VectorField1D:
    """Samples of ``lambda_n (g_n - id)`` with a Cauchy check against ``n // 2``."""
    xs = seq.grid(grid)
    vals = seq.scaled(n, xs)
    prev = seq.scaled(max(n // 2, 1), xs)
    cauchy = float(np.max(np.abs(vals - prev)))
    if cauchy_tol is not None and cauchy > cauchy_tol:
        raise CauchyError(f"sup |X_n - X_(n/2)| = {cauchy:.3g} exceeds {cauchy_tol:g}")
    return VectorField1D.from_samples(xs, vals, cauchy=cauchy)


@dataclass
class FlowReport:
    t0: float
    J0: tuple
    rows: list
    decreasing: bool

    def to_dict(self):
        return {"t0": self.t0, "J0": list(self.J0), "rows": self.rows, "decreasing": self.decreasing}


def verify_flow_approximation(seq: RenormSequence, J0, t0: float, n_list, field=None,
                              grid: int = GRID, floor: float = 1e-12,
                              noise: float = 1e-7) -> FlowReport:
    """Table of ``sup_{J0} |g_n^[lambda_n t0] - phi^t0|`` over ``n_list``."""
    if field is None:
        if seq.limit is not None:
            field = VectorField1D(-np.inf, np.inf, seq.limit)
        else:
            field = limit_vector_field(seq, max(n_list), grid)
    xs = np.linspace(J0[0], J0[1], grid)
    target = flow(field, xs, t0, tol=1e-12)
    rows = []
    for n in n_list:
        m = int(math.floor(seq.lam(n) * t0))
        err = float(np.max(np.abs(seq.iterate(n, m, xs) - target)))
        rows.append({"n": n, "iterations": m, "error": err})
    errs = [max(r["error"], floor) for r in rows]
    for a, b in zip(errs, errs[1:]):
        # growth below the integrator's noise level is not divergence
        if b > 2.0 * a and b > noise:
            raise DivergenceError(f"error grew from {a:.3g} to {b:.3g}")
    decreasing = all(b <= 1.1 * a or b <= noise for a, b in zip(errs, errs[1:]))
    return FlowReport(t0, tuple(J0), rows, decreasing)


# -- linearized hyperbolic germs: explicit bounds ----------------------------------------


@dataclass
class Lemma38Report:
    M1: float
    M2: float
    lower: float
    upper: float
    deriv_bound: float
    rows: list
    ok: bool

    def to_dict(self):
        return {k: getattr(self, k) for k in ("M1", "M2", "lower", "upper", "deriv_bound", "rows", "ok")}


def lemma_3_8_check(lam: float, g: CircleMap, delta1: float, delta2: float, n_list,
                    grid: int = GRID, j: int | None = None) -> Lemma38Report:
    """Two-sided bounds on ``lambda^-jn |g_n - id|`` and its derivative for ``f = lambda x``."""
    if not 0 < delta2 < delta1:
        raise ValueError("need 0 < delta2 < delta1")
    if not 0 < lam < 1:
        raise ValueError("need 0 < lambda < 1")
    if j is None:
        j = germ_info(g, 0.0).order
        if j is None:
            raise HypothesisError("g is not tangent to the identity")
    ys = np.linspace(0.0, delta1, grid)
    dj = np.asarray(g.derivatives(ys, j + 1)[j + 1], dtype=float)
    if np.any(dj >= 0):
        raise HypothesisError(
            f"g^({j + 1}) is not negative on [0, delta1]; replace g by its inverse")
    M1, M2 = float(np.max(np.abs(dj))), float(np.min(np.abs(dj)))
    lower = delta2 ** (j + 1) / math.factorial(j + 1) * M2
    upper = delta1 ** (j + 1) / math.factorial(j + 1) * M1
    dbound = delta1 ** j / math.factorial(j) * M1
    f = Linear(lam)
    xs = np.linspace(delta2, delta1, grid + 2)[1:-1]
    rows, ok = [], True
    for n in n_list:
        U = f.power(n)
        gn = Conjugate(U, g)
        s = lam ** (-j * n)
        v = s * np.abs(np.asarray(gn.disp(xs)))
        dv = s * np.abs(np.asarray(gn.disp_deriv(xs)))
        # the word f^-n g f^n against the closed form lambda^-n g(lambda^n x)
        word = np.asarray(U.inverse()(g(U(xs))))
        closed = lam ** (-n) * np.asarray(g(lam ** n * xs))
        eq = float(np.max(np.abs(word - closed)))
        row = {"n": n, "min": float(v.min()), "max": float(v.max()), "max_deriv": float(dv.max()),
               "equality_defect": eq}
        row["ok"] = bool(lower <= row["min"] and row["max"] <= upper and row["max_deriv"] <= dbound
                         and eq <= 1e-12)
        ok &= row["ok"]
        rows.append(row)
    return Lemma38Report(M1, M2, lower, upper, dbound, rows, ok)


# -- conjugating a C^1-small sequence into the linear region ----------------------------


@dataclass
class Prop39Row:
    n: int
    k: int
    inverted: bool
    k_selected: bool
    step_small: bool
    disp_flat: bool
    scaled_bounds: bool
    scaled_deriv_bound: bool
    conjugation_defect: float
    scaled_min: float
    scaled_max: float
    scaled_deriv_max: float

    @property
    def ok(self):
        return all((self.k_selected, self.step_small, self.disp_flat, self.scaled_bounds,
                    self.scaled_deriv_bound))


@dataclass
class Prop39Report:
    lam: float
    interval: tuple
    lower: float
    upper: float
    deriv_bound: float
    rows: list

    @property
    def ok(self):
        return all(r.ok for r in self.rows)

    def to_dict(self):
        return {"lambda": self.lam, "interval": list(self.interval), "lower": self.lower,
                "upper": self.upper, "deriv_bound": self.deriv_bound,
                "rows": [dict(r.__dict__, ok=r.ok) for r in self.rows]}


def affine_flow_family(alpha: float = 1.0, beta: float = 0.25, base: float = 4.0):
    """``h_n`` = time-``base^-n`` map of the field ``alpha + beta x``."""
    return lambda n: Affine.flow_of_linear_field(alpha, beta, base ** (-n))


def prop39_pipeline(lam: float, h_family, n_list, grid: int = GRID, I1=(-1.0, 1.0),
                    k_max: int = 4000, n_y: int = 257):
    """Select ``k_n`` for each ``h_n`` and check the resulting bounds on ``g_n``.

    Works in a chart where ``f(x) = lam x`` on ``I1``.  Returns the sequence
    ``g_n = f^(-k_n+1) h_n f^(k_n-1)`` (with ``lambda_n = n``) and a report.
    """
    if not 0 < lam < 1:
        raise ValueError("need 0 < lambda < 1")
    f = Linear(lam)
    lo = max(0.0, 2 * lam - 1)
    xs = np.linspace(lo, lam, grid)
    lower, upper, dbound = 3 / 8 * lam * (1 - lam), 5 / 4 * (1 - lam), 1 - lam
    rows, chosen = [], {}
    for n in n_list:
        h = h_family(n)
        h0 = float(h.disp(0.0))
        if h0 == 0.0:
            raise HypothesisError(f"h_{n} fixes 0")
        inverted = h0 < 0
        if inverted:
            h = h.inverse()
        k = None
        for kk in range(1, k_max + 1):
            if (n + 1) * abs(float(h.disp(lam ** kk))) > lam ** kk * (1 - lam):
                k = kk
                break
        if k is None:
            raise HypothesisError(f"no k <= {k_max} satisfies the selection rule for n = {n}")
        d = float(h.disp(lam ** k))
        step_small = n * abs(d) < lam ** (k - 1) * (1 - lam)
        r = lam ** (k - 1) * (1 - lam)
        ys = np.linspace(max(lam ** k - r, I1[0]), min(lam ** k + r, I1[1]), n_y)[1:-1]
        disp_flat = bool(np.max(np.abs(np.asarray(h.disp(ys)) - d)) < 0.25 * abs(d))
        U = f.power(k - 1)
        gn = Conjugate(U, h)
        v = n * np.abs(np.asarray(gn.disp(xs)))
        dv = n * np.abs(np.asarray(gn.disp_deriv(xs)))
        closed = lam ** (-(k - 1)) * np.asarray(h(lam ** (k - 1) * xs))
        conj_defect = float(np.max(np.abs(np.asarray(gn(xs)) - closed)))
        rows.append(Prop39Row(n, k, inverted, True, bool(step_small), disp_flat,
                              bool(v.min() >= lower and v.max() <= upper), bool(dv.max() < dbound),
                              conj_defect, float(v.min()), float(v.max()), float(dv.max())))
        chosen[n] = (k, h)

    def parts(n):
        if n not in chosen:
            raise KeyError(f"n = {n} was not processed by the pipeline")
        k, h = chosen[n]
        return f.power(k - 1), h

    seq = RenormSequence("prop39", (lo, lam), float, parts, {"lambda": lam},
                         None, {"k": {n: chosen[n][0] for n in chosen}})
    return seq, Prop39Report(lam, (lo, lam), lower, upper, dbound, rows)
