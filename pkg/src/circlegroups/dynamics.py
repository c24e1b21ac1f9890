"""Orbits, the orbit trichotomy, contractible arcs, the theta map, pinning
elements, an invariant-measure heuristic and gap collapsing.

Everything here works on finite samples, so the Minimal/Exceptional split is
heuristic; each result carries the evidence it was based on.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import (Arc, CircleMap, GroupPresentation, as_mobius, circle_dist,
                   inverse_word, reduce_word)
from .rotation import detect_rational

DEDUP_RES = 1e-10
MAX_POINTS = 1_000_000
MARGIN = 1e-6
PROBES = np.array([0.03, 0.161, 0.29, 0.407, 0.552, 0.68, 0.79, 0.917])


class BudgetExceeded(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


# -- small helpers ------------------------------------------------------------


def _dedup(points, res):
    """Sorted representatives in [0, 1) of the ``res``-bins hit by ``points``."""
    pts = np.mod(np.asarray(points, dtype=float), 1.0)
    keys = np.round(pts / res).astype(np.int64)
    n_bins = int(round(1.0 / res))
    keys = np.mod(keys, n_bins)
    keys, idx = np.unique(keys, return_index=True)
    return keys, pts[idx]


def fixed_points(F: CircleMap, n_grid: int = 4000, tol: float = 1e-9):
    """Fixed points in [0, 1) of a circle map, transversal ones by bracketing.

    Returns ``(points, P)`` where ``F(x) = x + P`` on the lift; an empty list
    when there is no fixed point.  Near-identity maps yield ``[0.0]``.
    """
    mob = as_mobius(F)
    if mob is not None:
        pts = mob.fixed_points()
        if not pts:
            return [], 0
        return pts, int(round(float(mob.disp(pts[0]))))
    xs = np.linspace(0.0, 1.0, n_grid + 1)
    d = np.asarray(F.disp(xs), dtype=float)
    for P in range(math.floor(d.min()), math.ceil(d.max()) + 1):
        g = d - P
        if np.max(np.abs(g)) <= tol:
            return [0.0], P
        roots = []
        for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]:
            if g[i] == 0:
                roots.append(float(xs[i]))
                continue
            if g[i + 1] == 0:
                continue
            roots.append(brentq(lambda x: float(F.disp(x)) - P, xs[i], xs[i + 1], xtol=1e-14))
        if not roots:
            i = int(np.argmin(np.abs(g)))
            if abs(g[i]) <= tol:
                roots.append(float(xs[i]))
        if roots:
            return sorted({round(r % 1.0, 13) % 1.0 for r in roots}), P
    return [], 0


def _all_words(n_gens: int, max_len: int):
    letters = [(i, s) for i in range(n_gens) for s in (1, -1)]
    for length in range(1, max_len + 1):
        for w in itertools.product(letters, repeat=length):
            if reduce_word(w) == w:
                yield w


# -- orbits and the trichotomy -----------------------------------------------------


@dataclass
class OrbitSample:
    points: np.ndarray
    depth: int
    seed: float
    closed: bool = False  # no new points at the last depth


def orbit(group: GroupPresentation, seed: float, depth: int, resolution: float = DEDUP_RES,
          max_points: int = MAX_POINTS) -> OrbitSample:
    """Images of ``seed`` under all words of length ``<= depth``."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    letters = [group.letter(i, s) for i, s in group.letters()]
    seen, pts = _dedup([seed], resolution)
    seen = set(seen.tolist())
    frontier = pts
    all_pts = [pts]
    closed = False
    for _ in range(depth):
        imgs = np.concatenate([np.atleast_1d(L(frontier)) for L in letters])
        keys, reps = _dedup(imgs, resolution)
        new = np.array([k not in seen for k in keys.tolist()], dtype=bool)
        if not np.any(new):
            closed = True
            break
        seen.update(keys[new].tolist())
        frontier = reps[new]
        all_pts.append(frontier)
        if len(seen) > max_points:
            raise BudgetExceeded(f"orbit exceeded {max_points} points")
    out = np.sort(np.concatenate(all_pts))
    return OrbitSample(out, depth, float(seed) % 1.0, closed)


@dataclass
class Classification:
    kind: str  # "FiniteOrbit" | "MinimalLikely" | "ExceptionalLikely"
    orbit: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    points: np.ndarray | None = None

    def to_dict(self):
        return {"kind": self.kind, "orbit": list(self.orbit),
                "gaps": [list(g) for g in self.gaps], "evidence": self.evidence}


def _gaps(points, threshold):
    """Circular gaps longer than ``threshold`` as ``(start, end)`` with end possibly > 1."""
    p = np.sort(np.mod(points, 1.0))
    if p.size == 0:
        return [], 1.0
    nxt = np.append(p[1:], p[0] + 1.0)
    lens = nxt - p
    big = np.nonzero(lens > threshold)[0]
    return [(float(p[i]), float(nxt[i])) for i in big], float(lens.max())


def find_finite_orbit(group: GroupPresentation, word_len: int = 4, max_size: int = 64,
                      tol: float = 1e-9):
    """A finite invariant orbit seeded at fixed points of short words, or ``None``.

    Attracting fixed points are tried first.  Invariance is verified for
    every generator to ``tol``.
    """
    cands = []
    for w in _all_words(len(group), word_len):
        F = group.word_map(w)
        pts, _ = fixed_points(F)
        for x in pts:
            cands.append((float(F.deriv(x)), len(w), x))
        if len(cands) > 200:
            break
    # periodic orbits of the generators cover rational rotations of long period
    for i, g in enumerate(group.generators):
        cert = detect_rational(g, max_q=max_size)
        if cert is not None and cert.q > 1:
            cands += [(float(g.power(cert.q).deriv(x)), cert.q, x) for x in cert.orbit[:1]]
    cands.sort()
    tried = set()
    for _, _, x in cands:
        key = round(float(x) % 1.0, 9)
        if key in tried:
            continue
        tried.add(key)
        try:
            sample = orbit(group, x, max_size, resolution=1e-9, max_points=max_size)
        except BudgetExceeded:
            continue
        if not sample.closed or sample.points.size > max_size:
            continue
        pts = sample.points
        ok = True
        for i, s in group.letters():
            img = np.mod(group.letter(i, s)(pts), 1.0)
            d = circle_dist(img[:, None], pts[None, :]).min(axis=1)
            if d.max() > tol:
                ok = False
                break
        if ok:
            return [float(p) for p in pts]
    return None


def _seeds(group: GroupPresentation, n: int = 3):
    seeds = []
    for g in group.generators:
        pts, _ = fixed_points(g)
        for p in pts:
            if all(circle_dist(p, s) > 1e-6 for s in seeds):
                seeds.append(p)
            if len(seeds) >= n:
                return seeds
    if not seeds:
        seeds = [k / n for k in range(n)]
    return seeds[:n]


def classify(group: GroupPresentation, depth: int = 12, epsilon: float = 0.05,
             resolution: float | None = None) -> Classification:
    """Orbit trichotomy: verified finite orbit, else gap analysis of merged orbits."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    fin = find_finite_orbit(group)
    if fin is not None:
        return Classification("FiniteOrbit", orbit=fin,
                              evidence={"size": len(fin), "verified_tol": 1e-9})
    res = resolution or epsilon / 8.0
    seeds = _seeds(group)
    per_depth = []
    for d in (depth - 1, depth):
        pts = np.concatenate([orbit(group, s, d, resolution=res).points for s in seeds])
        per_depth.append(_dedup(pts, res)[1])
    prev_gaps, _ = _gaps(per_depth[0], epsilon)
    gaps, max_gap = _gaps(per_depth[1], epsilon)
    stable = [g for g in gaps
              if any(abs(g[0] - h[0]) <= 2 * res and abs(g[1] - h[1]) <= 2 * res for h in prev_gaps)]
    evidence = {"max_gap": max_gap, "depth": depth, "epsilon": epsilon,
                "resolution": res, "n_points": int(per_depth[1].size), "seeds": seeds}
    pts = per_depth[1]
    if stable:
        return Classification("ExceptionalLikely", gaps=stable, evidence=evidence, points=pts)
    return Classification("MinimalLikely", evidence=evidence, points=pts)


# -- contractible arcs ------------------------------------------------------------


@dataclass
class ContractionWitness:
    word: tuple
    arc: Arc
    image_length: float

    def to_dict(self, group=None):
        w = group.format_word(self.word) if group is not None else [list(x) for x in self.word]
        return {"word": w, "arc": [self.arc.start, self.arc.length], "image_length": self.image_length}


def _key(vals):
    return tuple(np.round(np.mod(vals, 1.0) / 1e-9).astype(np.int64).tolist())


def best_first(group: GroupPresentation, start_pts: np.ndarray, score, max_word_len: int,
               budget: int, accept):
    """Best-first search over reduced words acting on ``start_pts``.

    ``score(vals)`` orders the heap and ``accept(vals)`` ends the search.
    The first two entries of ``vals`` travel with the word; a transposition
    table keyed on the images of fixed probe points prunes equal words.
    """
    letters = group.letters()
    maps = {l: group.letter(*l) for l in letters}
    pts = np.concatenate([np.asarray(start_pts, dtype=float), PROBES])
    table = {_key(pts[-PROBES.size:])}
    counter = itertools.count()
    heap = [(score(pts), next(counter), (), pts)]
    best = None
    expanded = 0
    while heap and expanded < budget:
        sc, _, word, vals = heapq.heappop(heap)
        expanded += 1
        if best is None or sc < best[0]:
            best = (sc, word, vals)
        if len(word) >= max_word_len:
            continue
        children = []
        for l in letters:
            if word and word[0] == (l[0], -l[1]):
                continue
            nv = np.asarray(maps[l](vals), dtype=float)
            k = _key(nv[-PROBES.size:])
            if k in table:
                continue
            table.add(k)
            nw = (l,) + word
            if accept(nv):
                return nw, nv, expanded
            children.append((score(nv), nw, nv))
        # deterministic order on ties
        for s, nw, nv in sorted(children, key=lambda c: (c[0], c[1])):
            heapq.heappush(heap, (s, next(counter), nw, nv))
    return None, best, expanded


def find_contraction(group: GroupPresentation, arc: Arc, target_length: float,
                     max_word_len: int = 40, budget: int = 20_000):
    """Word shrinking ``arc`` to length ``<= target_length``, or ``None``."""
    if not 0 < target_length < arc.length:
        raise ValueError("need 0 < target_length < arc length")
    ends = np.array([arc.start, arc.start + arc.length])

    def score(v):
        return float(v[1] - v[0])

    word, vals, _ = best_first(group, ends, score, max_word_len, budget,
                               lambda v: v[1] - v[0] <= target_length)
    if word is None:
        return None
    # re-evaluate from scratch
    F = group.word_map(word)
    length = float(F(ends[1]) - F(ends[0]))
    if length > target_length:
        return None
    return ContractionWitness(word, arc, length)


# -- invariant measures -----------------------------------------------------------


def _circ_sup(d):
    return 0.5 * (float(np.max(d)) - float(np.min(d)))


@dataclass
class MeasureReport:
    measure_found: bool
    stationary_profile: np.ndarray
    grid: np.ndarray
    atoms: list = field(default_factory=list)
    stabilization: list = field(default_factory=list)
    invariance_defect: float = float("nan")

    def to_dict(self):
        return {"measure_found": self.measure_found, "atoms": self.atoms,
                "stabilization": self.stabilization,
                "invariance_defect": self.invariance_defect,
                "grid": self.grid.tolist(), "profile": self.stationary_profile.tolist()}


def _cdf(samples, grid):
    s = np.sort(np.mod(samples, 1.0))
    return np.searchsorted(s, grid, side="right") / s.size


def invariant_measure_heuristic(group: GroupPresentation, iterations: int = 1000,
                                grid: int = 200, n_points: int = 2000, tol: float = 1e-3,
                                seed: int = 0) -> MeasureReport:
    """Cesaro averages of random-walk push-forwards of the uniform measure."""
    xs = np.linspace(0.0, 1.0, grid, endpoint=False)
    fin = find_finite_orbit(group)
    if fin is not None:
        prof = np.array([np.sum(np.array(fin) <= x) / len(fin) for x in xs])
        return MeasureReport(True, prof, xs, atoms=fin, invariance_defect=0.0)
    rng = np.random.default_rng(seed)
    letters = group.letters()
    maps = [group.letter(*l) for l in letters]
    pts = (np.arange(n_points) + 0.5) / n_points
    clouds = []
    checkpoints = {iterations // 4, iterations // 2, iterations}
    averages = {}
    for t in range(1, iterations + 1):
        pts = np.mod(maps[rng.integers(len(maps))](pts), 1.0)
        clouds.append(pts)
        if t in checkpoints:
            averages[t] = np.concatenate(clouds)
    t1, t2, t3 = sorted(checkpoints)
    c1, c2, c3 = (_cdf(averages[t], xs) for t in (t1, t2, t3))
    stab = [_circ_sup(c2 - c1), _circ_sup(c3 - c2)]
    mix = averages[t3]
    defect = max(_circ_sup(_cdf(np.asarray(g(mix)), xs) - c3) for g in group.generators)
    found = max(stab) <= tol and defect <= tol
    return MeasureReport(found, c3, xs, stabilization=stab, invariance_defect=defect)


# -- the theta map ----------------------------------------------------------------


@dataclass
class ThetaEstimate:
    period_kappa: int
    samples: list
    word_budget: int
    grid_size: int
    commutation_defect: float = float("nan")

    @property
    def h(self):
        return 1.0 / self.grid_size

    def __call__(self, x):
        """Piecewise-linear lift of the sampled theta."""
        xs = np.array([s[0] for s in self.samples] + [1.0])
        ys = np.array([s[1] for s in self.samples] + [self.samples[0][1] + 1.0])
        x = np.asarray(x, dtype=float)
        n = np.floor(x)
        return np.interp(x - n, xs, ys) + n

    def to_dict(self):
        return {"period_kappa": self.period_kappa, "word_budget": self.word_budget,
                "grid_size": self.grid_size, "commutation_defect": self.commutation_defect,
                "samples": [list(s) for s in self.samples]}


def estimate_theta(group: GroupPresentation, grid_size: int = 32, contraction_delta: float = 1e-3,
                   word_budget: int = 5000, max_word_len: int = 40, threads: int = 1,
                   check_preconditions: bool = True) -> ThetaEstimate:
    """Grid estimate of the largest contractible arc ``[x, theta(x)]``."""
    if check_preconditions:
        if find_finite_orbit(group) is not None:
            raise PreconditionError("group has a finite orbit")
        if invariant_measure_heuristic(group).measure_found:
            raise PreconditionError("group appears to preserve a probability measure")
    n = grid_size
    h = 1.0 / n

    def contracts(x, j):
        arc = Arc(x, j * h)
        target = min(contraction_delta, 0.5 * arc.length)
        return find_contraction(group, arc, target, max_word_len, word_budget) is not None

    def theta_at(i):
        x = i * h
        lo, hi = 0, n - 1  # lo: contracts (0 = trivially), hi: candidate upper end
        if contracts(x, hi):
            return x + 1.0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if contracts(x, mid):
                lo = mid
            else:
                hi = mid
        return x + lo * h

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ys = list(pool.map(theta_at, range(n)))
    else:
        ys = [theta_at(i) for i in range(n)]
    samples = [(i * h, y) for i, y in enumerate(ys)]
    if any(b[1] < a[1] - 1e-12 for a, b in zip(samples, samples[1:])):
        raise RuntimeError("theta estimate is not monotone; increase the word budget")
    est = ThetaEstimate(0, samples, word_budget, n)
    est.period_kappa = _kappa(est)
    xs = np.linspace(0.0, 1.0, 4 * n, endpoint=False)
    est.commutation_defect = max(
        float(np.max(np.abs(np.asarray(g(est(xs))) - est(np.asarray(g(xs))))))
        for g in group.generators)
    return est


def _kappa(est: ThetaEstimate, max_kappa: int = 64) -> int:
    xs = np.array([s[0] for s in est.samples])
    found = []
    for x in xs:
        y = x
        for j in range(1, max_kappa + 1):
            y = float(est(y))
            if abs(y - (x + 1.0)) <= j * est.h + 1e-12:
                found.append(j)
                break
            if y > x + 1.0 + j * est.h:
                break
    if not found:
        raise RuntimeError("theta iterates never return to x + 1")
    vals, counts = np.unique(found, return_counts=True)
    return int(vals[np.argmax(counts)])


# -- pinning elements -------------------------------------------------------------


def _dist_to_arcs(x, arcs, margin):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.inf)
    for a in arcs:
        rel = np.mod(x - a.start - margin, 1.0)
        inner = a.length - 2 * margin
        d = np.where(rel <= inner, 0.0, np.minimum(rel - inner, 1.0 - rel))
        out = np.minimum(out, d)
    return out


def check_pinning(F: CircleMap, arcs, n_grid: int = 10_000, margin: float = MARGIN):
    """Fix(F) inside the union of arc interiors and F(complement) inside it too."""
    fix, _ = fixed_points(F, n_grid=n_grid)
    if not fix:
        return False, "no fixed points"
    if np.max(_dist_to_arcs(np.array(fix), arcs, margin)) > 0:
        return False, "fixed point outside the arcs"
    xs = np.linspace(0.0, 1.0, n_grid, endpoint=False)
    outside = xs[_dist_to_arcs(xs, arcs, 0.0) > 0]
    if outside.size and np.max(_dist_to_arcs(np.asarray(F(outside)), arcs, margin)) > 0:
        return False, "complement not mapped inside"
    return True, "ok"


def _theta_arcs(base_arc: Arc, kappa: int, theta):
    arcs = [base_arc]
    for _ in range(1, kappa):
        a = arcs[-1]
        s, e = float(theta(a.start)), float(theta(a.start + a.length))
        arcs.append(Arc(s, e - s))
    for i, a in enumerate(arcs):
        for b in arcs[i + 1:]:
            if np.any(b.contains(a.grid(64))) or np.any(a.contains(b.grid(64))):
                raise PreconditionError("theta images of the base arc overlap")
    return arcs


def _powered(group, word, arcs, max_power):
    F = group.word_map(word)
    for sign in (1, -1):
        w1 = word if sign > 0 else inverse_word(word)
        for m in range(1, max_power + 1):
            w = w1 * m
            ok, _ = check_pinning(group.word_map(w) if m > 1 or sign < 0 else F, arcs)
            if ok:
                return w
    return None


def find_pinning_element(group: GroupPresentation, base_arc: Arc, kappa: int = 1, theta=None,
                         word_budget: int = 5000, max_word_len: int = 12,
                         max_power: int = 64):
    """Word ``h`` with Fix(h) and h(complement) inside the union of theta^j(base_arc)."""
    if word_budget <= 0:
        raise BudgetExceeded("word budget must be positive")
    arcs = _theta_arcs(base_arc, kappa, theta) if kappa > 1 else [base_arc]
    for i in range(len(group)):
        w = _powered(group, ((i, 1),), arcs, 8)
        if w is not None:
            return w
    # an element with fixed points
    h0 = None
    for w in _all_words(len(group), 3):
        fix, _ = fixed_points(group.word_map(w))
        if fix and len(fix) <= 8:
            h0, h0_fix = w, fix
            break
    if h0 is None:
        raise PreconditionError("no short word with a fixed point")
    J = _minimal_arc(h0_fix)
    samples = J.grid(33)
    inner = [Arc(a.start + MARGIN, a.length - 2 * MARGIN) for a in arcs]

    def score(v):
        return float(np.max(_dist_to_arcs(v[:33], inner, 0.0))) + 1e-3 * float(v[32] - v[0])

    def accept(v):
        return float(np.max(_dist_to_arcs(v[:33], inner, 0.0))) == 0.0

    tried = 0
    while tried < 4:
        word, _, _ = best_first(group, samples, score, max_word_len, word_budget, accept)
        tried += 1
        if word is None:
            break
        conj = word + h0 + inverse_word(word)
        w = _powered(group, reduce_word(conj), arcs, max_power)
        if w is not None:
            return w
        break
    raise BudgetExceeded("no pinning element found within the word budget")


def _minimal_arc(points, pad: float = 1e-3) -> Arc:
    """Shortest arc containing all ``points``, padded slightly."""
    p = np.sort(np.mod(points, 1.0))
    if p.size == 1:
        return Arc(p[0] - pad, 2 * pad)
    nxt = np.append(p[1:], p[0] + 1.0)
    i = int(np.argmax(nxt - p))
    start = nxt[i]
    length = 1.0 - (nxt[i] - p[i])
    return Arc(start - pad, length + 2 * pad)


# -- gap collapse -------------------------------------------------------------------


class SampledCircleMap(CircleMap):
    """Monotone degree-one map given by knots on one period, linear in between."""

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        order = np.argsort(xs)
        xs, ys = xs[order], np.maximum.accumulate(ys[order])
        self.x0 = float(xs[0])
        self.xs = np.append(xs, xs[0] + 1.0)
        self.ys = np.append(ys, ys[0] + 1.0)

    def _f(self, x):
        x = np.asarray(x, dtype=float)
        n = np.floor(x - self.x0)
        return np.interp(x - n, self.xs, self.ys) + n

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        n = np.floor(x - self.x0)
        slopes = np.diff(self.ys) / np.diff(self.xs)
        i = np.clip(np.searchsorted(self.xs, x - n, side="right") - 1, 0, slopes.size - 1)
        return slopes[i]

    partner = None  # a separately sampled inverse, when one exists

    def inverse(self):
        """The sampled inverse if known, else the generalized inverse (flat pieces become jumps)."""
        if self.partner is not None:
            return self.partner
        return SampledCircleMap(self.ys[:-1], self.xs[:-1])

    def invert_at(self, y, tol=None, max_iter=0):
        return self.inverse()(y)

    def scalar(self):
        xs, ys, x0 = self.xs.tolist(), self.ys.tolist(), self.x0

        def f(x):
            n = math.floor(x - x0)
            u = x - n
            i = min(max(bisect.bisect_right(xs, u) - 1, 0), len(xs) - 2)
            t = (u - xs[i]) / (xs[i + 1] - xs[i])
            return ys[i] + t * (ys[i + 1] - ys[i]) + n

        return f

    def to_dict(self):
        return {"type": "sampled", "x": self.xs[:-1].tolist(), "y": self.ys[:-1].tolist()}


@dataclass
class CollapseResult:
    group: GroupPresentation
    h: CircleMap
    identity: bool = False
    knots: np.ndarray | None = field(default=None, repr=False)

    def psi(self, F: CircleMap) -> CircleMap:
        """``h o F o h^-1`` sampled at the collapse knots.

        Sampling a whole element keeps fixed points that sit on gap ends;
        composing sampled generators can lose them to interpolation error.
        """
        if self.identity:
            return F
        return _sampled_conjugate(self.h, F, self.knots)


def _sampled_conjugate(h, F, knots):
    u = np.asarray(h(knots), dtype=float)
    # F and h act on the lift, so v is already monotone up to round-off
    v = np.asarray(h(np.asarray(F(knots), dtype=float)), dtype=float)
    return SampledCircleMap(u, v)


def collapse_map(gaps) -> SampledCircleMap:
    """Monotone degree-one map flat on each gap, with constant slope elsewhere.

    ``gaps`` are disjoint pairs ``(a, b)`` with ``a`` in [0, 1) and ``b > a``.
    """
    gaps = sorted(gaps)
    if not gaps:
        raise PreconditionError("no gaps to collapse")
    rest = 1.0 - sum(b - a for a, b in gaps)
    if rest <= 0:
        raise PreconditionError("gaps cover the whole circle")
    xs, ys, acc = [], [], 0.0
    for k, (a, b) in enumerate(gaps):
        if k:
            acc += a - gaps[k - 1][1]
        xs += [a, b]
        ys += [acc / rest, acc / rest]
    return SampledCircleMap(np.array(xs), np.array(ys) + gaps[0][0])


def _merge_arcs(a, b):
    """Union of arcs ``[a_i, b_i]`` (``b_i > a_i``) as sorted disjoint pairs, start in [0, 1)."""
    order = np.argsort(a)
    out = []
    for lo, hi in zip(a[order], b[order]):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    # an arc crossing 1 may swallow the first ones
    while len(out) > 1 and out[-1][1] - 1.0 >= out[0][0]:
        lo, hi = out.pop(0)
        out[-1][1] = max(out[-1][1], hi + 1.0)
    return [(float(lo), float(hi)) for lo, hi in out]


def gap_family(group: GroupPresentation, gaps, min_length: float = 1e-4, max_depth: int = 60,
               max_gaps: int = 200_000):
    """Images of the primary gaps under group words, down to length ``min_length``.

    Gaps of an exceptional minimal set are permuted by the group, so the family
    approximates the full complement of the minimal set from outside in.  Only
    images shorter than their parent are followed.
    """
    lo = np.array([g[0] for g in gaps], dtype=float) % 1.0
    hi = lo + np.array([(g[1] - g[0]) % 1.0 for g in gaps], dtype=float)
    seen = set(np.round(lo, 9).tolist())
    all_lo, all_hi = [lo], [hi]
    for _ in range(max_depth):
        new_lo, new_hi = [], []
        for l in group.letters():
            F = group.letter(*l)
            fa = np.asarray(F(lo), dtype=float)
            fb = np.asarray(F(hi), dtype=float)
            # only shrinking images: endpoint errors of the primary gaps then contract too
            shrink = (fb - fa) < (hi - lo)
            new_lo.append(fa[shrink] % 1.0)
            new_hi.append(fa[shrink] % 1.0 + (fb - fa)[shrink])
        lo, hi = np.concatenate(new_lo), np.concatenate(new_hi)
        keep = hi - lo >= min_length
        lo, hi = lo[keep], hi[keep]
        keys = np.round(lo, 9)
        fresh = np.zeros(lo.size, dtype=bool)
        for k, key in enumerate(keys.tolist()):
            if key not in seen:
                seen.add(key)
                fresh[k] = True
        lo, hi = lo[fresh], hi[fresh]
        if lo.size == 0:
            break
        all_lo.append(lo)
        all_hi.append(hi)
        if len(seen) > max_gaps:
            raise BudgetExceeded(f"more than {max_gaps} gap images")
    return _merge_arcs(np.concatenate(all_lo), np.concatenate(all_hi))


def refine_gaps(group: GroupPresentation, gaps, seeds, resolution: float = 1e-7, depth: int = 40,
                max_points: int = 400_000, pad: float = 0.01):
    """Shrink each reported gap to the largest empty interval of a fine orbit sample.

    Classification gaps are only accurate to its dedup resolution and may
    overhang points of the minimal set.
    """
    pts = np.concatenate([orbit(group, s, depth, resolution=resolution,
                                max_points=max_points).points for s in seeds])
    pts = np.sort(np.mod(pts, 1.0))
    pts = np.concatenate([pts - 1.0, pts, pts + 1.0])
    out = []
    for a, b in gaps:
        a = a % 1.0
        b = a + (b - a) % 1.0
        near = pts[(pts > a - pad) & (pts < b + pad)]
        if near.size < 2:
            out.append((a, b))
            continue
        k = int(np.argmax(np.diff(near)))
        out.append((float(near[k]), float(near[k + 1])))
    return out


def gap_collapse(group: GroupPresentation, classification: Classification,
                 resolution: float = 1e-4, max_depth: int = 60, max_gaps: int = 200_000):
    """Semi-conjugate an exceptional action onto one with a full minimal set.

    The stable gaps of ``classification`` are spread by the group down to
    length ``resolution``; ``h`` collapses every gap of that family.  The
    collapsed generators are sampled at gap midpoints, so ``h o g = psi(g) o h``
    holds exactly on every gap whose image is also in the family.
    """
    if classification.kind == "MinimalLikely":
        from .core import Rotation
        return CollapseResult(group, Rotation(0.0), identity=True)
    if classification.kind != "ExceptionalLikely" or not classification.gaps:
        raise PreconditionError("gap collapse needs a stable gap structure")
    seeds = classification.evidence.get("seeds") or [0.0]
    primary = refine_gaps(group, classification.gaps, seeds)
    fam = gap_family(group, primary, resolution, max_depth, max_gaps)
    h = collapse_map(fam)
    # gap midpoints: F carries a gap deep into its image gap, where h is exactly flat
    knots = np.array([0.5 * (a + b) for a, b in fam])
    _, idx = np.unique(np.asarray(h(knots), dtype=float), return_index=True)
    knots = knots[idx]
    gens = []
    for g in group.generators:
        fwd, back = _sampled_conjugate(h, g, knots), _sampled_conjugate(h, g.inverse(), knots)
        fwd.partner, back.partner = back, fwd
        gens.append(fwd)
    return CollapseResult(GroupPresentation(gens, group.names), h, knots=knots)
