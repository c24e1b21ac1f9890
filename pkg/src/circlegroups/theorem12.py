"""Manufacturing group elements with small nonzero rotation number.

Starting from a group that is neither finite-orbit nor measure preserving and
that contains a local flow in its closure, the construction

1. picks an arc ``I0 = [a, b]`` moved off itself by the flow in time ``t0``,
2. takes a pinning element ``h`` whose fixed points sit in ``I0`` and which
   sweeps the rest of the circle into ``I0``,
3. finds the critical time ``T``: the last time at which the flow graph over
   ``I0`` still touches the graph of ``h``,
4. approximates flow times ``t_i`` decreasing to ``T`` by genuine group words
   ``g_i`` and sets ``f_i = h^-1 g_i``.

Every ``f_i`` has a lift with ``x < f_i(x) < x + 1``, so ``0 < rho(f_i) < 1``,
and ``rho(f_i)`` tends to zero.  All relations are checked on grids and are
reported under descriptive labels.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .core import Arc, GroupPresentation, Lift, inverse_word
from .dynamics import (MARGIN, BudgetExceeded, PreconditionError, ThetaEstimate, _dist_to_arcs,
                       _theta_arcs, estimate_theta, find_finite_orbit, find_pinning_element,
                       fixed_points, invariant_measure_heuristic)
from .ode import FlowExitError
from .renorm import LocalFlow, RenormSequence, VectorField1D, limit_vector_field
from .rotation import MAX_ITERATIONS, translation_number

GRID = 10_000
FLOW_TOL = 1e-12


class RelationError(RuntimeError):
    """One or more grid-checked relations failed; ``failed`` lists their labels."""

    def __init__(self, failed, detail: str = ""):
        self.failed = list(failed)
        msg = "failed relations: " + ", ".join(self.failed)
        super().__init__(msg + (f" ({detail})" if detail else ""))


class BracketError(RuntimeError):
    pass


# -- setup --------------------------------------------------------------------------


@dataclass
class Theorem12Setup:
    group: GroupPresentation
    theta: ThetaEstimate | None
    I0: Arc
    flow: LocalFlow
    t0: float
    h: tuple
    h_lift: Callable = field(repr=False)
    h_lift_inv: Callable = field(repr=False)
    theta_lift: Callable = field(repr=False)
    sequence: RenormSequence | None = field(default=None, repr=False)
    sign: int = 1
    h_shift: int = 0
    kappa: int = 1
    checks: dict = field(default_factory=dict)

    @property
    def a(self) -> float:
        return float(self.I0.start)

    @property
    def b(self) -> float:
        return float(self.I0.end)

    def phi(self, x, t: float):
        """Lifted local flow on I0 in the normalized direction."""
        return self.flow(np.asarray(x, dtype=float), self.sign * t)

    def grid(self, n: int = GRID):
        return np.linspace(self.a, self.b, n)

    def to_dict(self):
        return {"I0": [self.a, self.b], "t0": self.t0, "kappa": self.kappa, "sign": self.sign,
                "h": self.group.format_word(self.h), "h_shift": self.h_shift,
                "checks": dict(self.checks)}


def _field_of(seq: RenormSequence, n_field: int) -> VectorField1D:
    lo, hi = seq.interval
    if seq.limit is not None:
        return VectorField1D.from_callable(seq.limit, lo, hi)
    return limit_vector_field(seq, n_field)


def _travel_time(field: VectorField1D, a: float, b: float) -> float:
    val, _ = quad(lambda x: 1.0 / abs(float(field(x))), a, b, limit=200)
    return val


def _flow_defined(flow: LocalFlow, xs, t: float, sign: int) -> bool:
    try:
        flow(xs, sign * t)
        flow(xs, -sign * t)
    except FlowExitError:
        return False
    return True


def _choose_I0(field: VectorField1D, flow: LocalFlow, sign: int, n_scan: int = 64):
    """Scan the sampled field for an arc moved off itself within the flow domain."""
    lo, hi = field.lo, field.hi
    xs = np.linspace(lo, hi, n_scan)
    vals = np.abs(np.asarray(field(xs)))
    ok = vals > 0.05 * vals.max()
    # longest run of grid points where the field is comfortably nonzero
    best, start = (0, 0), None
    for i, good in enumerate(np.append(ok, False)):
        if good and start is None:
            start = i
        elif not good and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    if best[1] - best[0] < 4:
        raise PreconditionError("the limit field vanishes on most of its interval")
    L0, L1 = xs[best[0]], xs[best[1] - 1]
    width = L1 - L0
    for frac in (0.3, 0.2, 0.1, 0.05):
        for pos in np.linspace(0.0, 1.0 - frac, 9):
            a = L0 + pos * width
            b = a + frac * width
            t0 = 1.25 * _travel_time(field, a, b)
            if _flow_defined(flow, np.array([a, b]), t0, sign):
                return a, b, t0
    raise PreconditionError("no arc I0 whose flow image is disjoint from it")


def _lift_with_fixed_points(F):
    fix, _ = fixed_points(F)
    if not fix:
        raise PreconditionError("pinning element has no fixed point")
    return int(round(float(F.disp(fix[0])))), fix


def build_setup(group: GroupPresentation, seq: RenormSequence, I0=None, t0: float | None = None,
                h=None, theta: ThetaEstimate | None = None, word_budget: int = 5000,
                theta_grid: int = 8, n_field: int = 1024, grid: int = GRID,
                check_preconditions: bool = True) -> Theorem12Setup:
    """Arc, flow, theta and pinning element with normalized lifts.

    ``I0`` may be an :class:`Arc` or ``(a, b)``; ``h`` a word, a word string or
    ``None`` (then it is searched for with ``word_budget``).
    """
    if check_preconditions:
        if find_finite_orbit(group) is not None:
            raise PreconditionError("group has a finite orbit")
        if invariant_measure_heuristic(group).measure_found:
            raise PreconditionError("group appears to preserve a probability measure")
    if word_budget <= 0:
        raise BudgetExceeded("word budget must be positive")

    field_ = _field_of(seq, n_field)
    flow = LocalFlow(field_, atol=FLOW_TOL)
    mid = 0.5 * (field_.lo + field_.hi)
    sign = 1 if float(field_(mid)) > 0 else -1

    if I0 is None:
        a, b, t_guess = _choose_I0(field_, flow, sign)
        I0 = Arc.from_endpoints(a, b)
        t0 = t_guess if t0 is None else t0
    elif not isinstance(I0, Arc):
        I0 = Arc.from_endpoints(*I0)
    a, b = float(I0.start), float(I0.end)
    if t0 is None:
        t0 = 1.25 * _travel_time(field_, a, b)
    # shrink I0 from the right until the flow is defined up to time t0
    for _ in range(20):
        if _flow_defined(flow, np.array([a, b]), t0, sign):
            break
        b = a + 0.8 * (b - a)
    else:
        raise PreconditionError("the flow leaves its interval before t0 on every subarc")
    I0 = Arc.from_endpoints(a, b)
    checks = {"flow_image_disjoint": bool(float(flow(a, sign * t0)) > b)}
    if not checks["flow_image_disjoint"]:
        raise PreconditionError("the flow image of I0 meets I0 at time t0")

    if theta is None:
        theta = estimate_theta(group, grid_size=theta_grid, word_budget=word_budget,
                               check_preconditions=False)
    kappa = theta.period_kappa
    theta_lift = (lambda x: np.asarray(x, dtype=float) + 1.0) if kappa == 1 else theta
    arcs = _theta_arcs(I0, kappa, theta) if kappa > 1 else [I0]
    checks["theta_images_disjoint"] = True

    if h is None:
        h = find_pinning_element(group, I0, kappa, theta, word_budget=word_budget)
    elif isinstance(h, str):
        h = group.parse_word(h)
    h = tuple(tuple(l) for l in h)

    H = group.word_map(h)
    shift, _ = _lift_with_fixed_points(H)
    if float(H(a)) - shift > a:
        h = inverse_word(h)
        H = group.word_map(h)
        shift, _ = _lift_with_fixed_points(H)

    def h_lift(x, H=H, s=shift):
        return np.asarray(H(np.asarray(x, dtype=float)), dtype=float) - s

    def h_lift_inv(y, Hi=H.inverse(), s=shift):
        return np.asarray(Hi(np.asarray(y, dtype=float) + s), dtype=float)

    fix, _ = fixed_points(H, n_grid=grid)
    circle = np.linspace(0.0, 1.0, grid, endpoint=False)
    outside = circle[_dist_to_arcs(circle, arcs, 0.0) > 0]
    checks["h_fixed_points_in_base_arcs"] = bool(fix) and bool(
        np.max(_dist_to_arcs(np.array(fix), arcs, MARGIN)) == 0)
    checks["h_sweeps_complement_into_base_arcs"] = bool(
        outside.size == 0 or np.max(_dist_to_arcs(np.asarray(H(outside)), arcs, MARGIN)) == 0)
    hb = float(h_lift(b))
    checks["h_moves_a_backward"] = bool(float(h_lift(a)) < a)
    checks["h_pulls_b_inside"] = bool(a < hb < b)
    checks["h_theta_a_below_b"] = bool(float(h_lift(theta_lift(a))) < b)
    failed = [k for k, v in checks.items() if not v]
    if failed:
        raise RelationError(failed)
    return Theorem12Setup(group, theta, I0, flow, float(t0), h, h_lift, h_lift_inv, theta_lift,
                          seq, sign, shift, kappa, checks)


# -- the critical time -----------------------------------------------------------------


def compute_T(setup: Theorem12Setup, grid: int = GRID, tol: float = 1e-12) -> float:
    """Last time at which the flow graph over I0 touches the graph of ``h``.

    ``t -> min_x (phi^t(x) - h(x))`` is increasing; ``T`` is its zero, located
    by bisection and returned from the side where the flow dominates.
    """
    xs = setup.grid(grid)
    hx = setup.h_lift(xs)

    def gap(t):
        return float(np.min(setup.phi(xs, t) - hx))

    lo, hi = 0.0, setup.t0
    if gap(hi) <= 0.0:
        raise BracketError("the flow at time t0 does not dominate h on I0")
    if gap(lo) > 0.0:
        raise BracketError("the flow graph never touches the graph of h on I0")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    T = hi
    pT = setup.phi(xs, T)
    checks = {
        "critical_flow_between_h_and_h_plus_one": bool(np.all(hx <= pT) and np.all(pT < hx + 1.0)),
        "critical_flow_a_below_h_b": bool(float(pT[0]) < float(setup.h_lift(setup.b))),
        "critical_time_below_t0": bool(T < setup.t0),
    }
    setup.checks.update(checks)
    failed = [k for k, v in checks.items() if not v]
    if failed:
        raise RelationError(failed)
    return T


# -- the family f_i = h^-1 g_i -----------------------------------------------------------


@dataclass
class FamilyMember:
    index: int
    t: float
    n: int
    m: int
    word: tuple
    rho: float
    error: float
    approx_error: float
    tolerance: float
    checks: dict

    def to_dict(self, group: GroupPresentation | None = None):
        w = group.format_word(self.word) if group is not None else [list(x) for x in self.word]
        return {"index": self.index, "t": self.t, "n": self.n, "m": self.m, "word": w,
                "rho": self.rho, "error": self.error, "approx_error": self.approx_error,
                "tolerance": self.tolerance, "checks": dict(self.checks)}


@dataclass
class SmallRotationFamily:
    members: list
    T: float = float("nan")
    t1: float = float("nan")

    def __len__(self):
        return len(self.members)

    def to_dict(self, group=None):
        return {"T": self.T, "t1": self.t1, "members": [m.to_dict(group) for m in self.members]}


def _iterate_word(letters, n: int, m: int):
    (fi, fs), (gi, gs) = letters
    f_in = ((fi, -fs),) * n
    f_out = ((fi, fs),) * n
    g_pow = ((gi, gs if m > 0 else -gs),) * abs(m)
    return f_in + g_pow + f_out


def _estimate_rho(F, base_offset: int, start: int = 10_000):
    """Translation number of a fixed lift with ``error < rho / 10`` when possible."""
    N = start
    while True:
        est = translation_number(Lift(F, base_offset), N)
        tau = est.translation
        if abs(tau) > 10.0 * est.error_bound or N * 10 > MAX_ITERATIONS:
            return tau, est.error_bound
        N *= 10


def _make_member(setup: Theorem12Setup, T: float, i: int, t_i: float, tol_i: float,
                 n_start: int, n_max: int, grid: int) -> FamilyMember:
    seq = setup.sequence
    letters = seq.info.get("letters") if seq is not None else None
    if letters is None:
        raise PreconditionError("the flow source does not record the letters of f and g")
    group = setup.group
    a = setup.a
    xs = setup.grid(grid)
    target = setup.phi(xs, t_i)
    chosen = None
    for n in range(n_start, n_max + 1):
        m = setup.sign * math.floor(seq.lam(n) * t_i)
        if m == 0:
            continue
        word = _iterate_word(letters, n, m)
        G = group.word_map(word)
        gv = np.asarray(G(xs), dtype=float)
        k = int(round(gv[0] - target[0]))
        err = float(np.max(np.abs(gv - k - target)))
        if err < tol_i:
            chosen = (n, m, word, G, k, gv - k, err)
            break
    if chosen is None:
        raise RelationError([f"approximation_tolerance_{i}"],
                            f"no n <= {n_max} approximates the flow within {tol_i:.3g}")
    n, m, word, G, k, g_lift, err = chosen
    hx = setup.h_lift(xs)
    pT = setup.phi(xs, T)
    checks = {
        "g_above_critical_flow": bool(np.all(g_lift > pT) and np.all(pT > xs)),
        "g_between_h_and_h_plus_one": bool(np.all(hx < g_lift) and np.all(g_lift < hx + 1.0)),
        "g_a_below_h_b": bool(g_lift[0] < float(setup.h_lift(setup.b))),
    }
    failed = [key for key, v in checks.items() if not v]
    if failed:
        raise RelationError(failed, f"member {i}, n = {n}")
    f_word = inverse_word(setup.h) + word
    F = group.word_map(f_word)
    # the lift h~^-1 g~ equals the composed canonical lift plus (h_shift - k)
    k_target = k - setup.h_shift
    base_offset = math.floor(float(F(0.0))) - k_target
    per = np.linspace(0.0, 1.0, GRID, endpoint=False)
    d = np.asarray(F(per), dtype=float) - k_target - per
    checks["f_displacement_in_open_unit"] = bool(np.all(d > 0.0) and np.all(d < 1.0))
    rho, error = _estimate_rho(F, base_offset)
    return FamilyMember(i, t_i, n, m, f_word, rho, error, err, tol_i, checks)


def admissible_time(setup: Theorem12Setup, T: float, grid: int = GRID, tol: float = 1e-9) -> float:
    """Largest ``t`` in ``[T, t0]`` below which the flow stays under ``h + 1`` and ``h(b)``.

    Flow times in ``(T, t)`` satisfy the relations required of ``g_i`` with room
    to spare, so the default ``t1`` is taken halfway into this window.
    """
    xs = setup.grid(grid)
    hx = setup.h_lift(xs)
    hb = float(setup.h_lift(setup.b))

    def good(t):
        p = setup.phi(xs, t)
        return bool(np.all(p < hx + 1.0) and p[0] < hb)

    if good(setup.t0):
        return setup.t0
    lo, hi = T, setup.t0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if good(mid):
            lo = mid
        else:
            hi = mid
    return lo


def manufacture_family(setup: Theorem12Setup, T: float, count: int = 5, t1: float | None = None,
                       tolerances=None, window_fraction: float = 0.5, n_start: int = 1, n_max: int = 64, grid: int = 2000,
                       threads: int = 1) -> SmallRotationFamily:
    """Words ``f_i = h^-1 g_i`` with ``g_i`` approximating the flow at ``t_i -> T``.

    ``t_i = T + (t1 - T) / 2^(i-1)``; the tolerance for ``g_i`` defaults to
    ``(t_i - T)/10`` and may be overridden by a scalar or a list.  Without an
    explicit ``t1`` it sits ``window_fraction`` of the way into the admissible
    window above ``T``.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if t1 is None:
        t1 = T + window_fraction * (admissible_time(setup, T) - T)
    if not T < t1 < setup.t0:
        raise ValueError("need T < t1 < t0")
    ts = [T + (t1 - T) / 2 ** (i - 1) for i in range(1, count + 1)]
    if tolerances is None:
        tols = [(t - T) / 10.0 for t in ts]
    elif np.isscalar(tolerances):
        tols = [float(tolerances)] * count
    else:
        tols = [float(x) for x in tolerances]
        if len(tols) < count:
            raise ValueError("tolerance schedule is shorter than count")

    def build(i):
        return _make_member(setup, T, i + 1, ts[i], tols[i], n_start, n_max, grid)

    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            members = list(pool.map(build, range(count)))
    else:
        members = [build(i) for i in range(count)]
    return SmallRotationFamily(members, T, t1)


# -- small nonzero rotation numbers --------------------------------------------------------


@dataclass
class Lemma42Report:
    rows: list
    checks: dict
    inconclusive: list
    threshold: float

    @property
    def status(self) -> str:
        if self.inconclusive:
            return "inconclusive"
        return "pass" if all(self.checks.values()) else "fail"

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    def to_dict(self):
        return {"status": self.status, "threshold": self.threshold, "checks": dict(self.checks),
                "inconclusive": list(self.inconclusive), "rows": self.rows}


def verify_lemma42(family: SmallRotationFamily, threshold: float = 0.05) -> Lemma42Report:
    """Positive rotation numbers below one, decreasing below ``threshold``."""
    members = family.members if isinstance(family, SmallRotationFamily) else list(family)
    if not members:
        raise PreconditionError("the family is empty")
    rows = [{"i": m.index, "rho": m.rho, "error": m.error} for m in members]
    inconclusive = [m.index for m in members if m.rho <= m.error]
    in_unit = all(m.error < m.rho < 1.0 - m.error for m in members)
    pairs = list(zip(members, members[1:]))
    weak = all(q.rho <= p.rho + p.error + q.error for p, q in pairs)
    strict = all(q.rho + q.error < p.rho - p.error for p, q in pairs)
    checks = {
        "rho_in_open_unit": in_unit,
        "rho_decreasing_within_error": weak,
        "rho_strictly_decreasing": strict,
        "rho_below_threshold": bool(members[-1].rho + members[-1].error < threshold),
    }
    disp = [m.checks.get("f_displacement_in_open_unit") for m in members]
    if all(d is not None for d in disp):
        checks["f_displacement_in_open_unit"] = all(disp)
    return Lemma42Report(rows, checks, inconclusive, threshold)
