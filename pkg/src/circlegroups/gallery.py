"""Named example groups with re-verifiable expected properties.

Entries live as JSON group configurations in ``circlegroups/data`` and use the
same schema as user configurations.  Expected properties are claims to be
checked, never trusted: every ``verify_*`` function recomputes them.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .core import (BumpFlowTime, GroupPresentation, Mobius, as_mobius, group_from_dict,
                   reduce_word)
from .dynamics import _dedup, classify, find_finite_orbit, orbit
from .renorm import RenormSequence, make_conjugation_sequence
from .rotation import rotation_number

NAMES = ("psl2z", "schottky2", "remark44", "gstar")


@dataclass
class GalleryEntry:
    name: str
    group: GroupPresentation
    expected: dict
    config: dict = field(repr=False, default_factory=dict)

    def to_dict(self):
        return dict(self.config)


def config_path(name: str):
    return resources.files("circlegroups") / "data" / f"gallery_{name}.json"


def load(name: str) -> GalleryEntry:
    if name not in NAMES:
        raise KeyError(f"unknown gallery entry {name!r}; known: {', '.join(NAMES)}")
    cfg = json.loads(config_path(name).read_text())
    return GalleryEntry(name, group_from_dict(cfg), cfg.get("expected", {}), cfg)


def load_config(path) -> GalleryEntry:
    """A group configuration file; gallery entries may be referenced by file name."""
    p = Path(path)
    if not p.exists():
        stem = p.stem.removeprefix("gallery_")
        if stem in NAMES:
            return load(stem)
    cfg = json.loads(p.read_text())
    return GalleryEntry(cfg.get("name", p.stem), group_from_dict(cfg), cfg.get("expected", {}), cfg)


# -- finite rotation-number images --------------------------------------------------------


def distinct_words(group: GroupPresentation, depth: int):
    """Reduced words of length ``<= depth``, one per distinct Mobius element when possible."""
    letters = group.letters()
    seen = set()
    out = []
    for length in range(1, depth + 1):
        for w in itertools.product(letters, repeat=length):
            if reduce_word(w) != w:
                continue
            m = as_mobius(group.word_map(w))
            if m is not None:
                a, b, c, d = m.m
                sgn = -1.0 if (a, b) < (0.0, 0.0) else 1.0
                key = tuple(np.round(np.array([a, b, c, d]) * sgn, 9).tolist())
                if key in seen:
                    continue
                seen.add(key)
            out.append(w)
    return out


@dataclass
class RhoImageReport:
    allowed: list
    observed: list
    n_words: int
    iterations: int
    failures: list
    ok: bool

    def to_dict(self):
        return {"allowed": self.allowed, "observed": self.observed, "n_words": self.n_words,
                "iterations": self.iterations, "failures": self.failures,
                "rho_image_within_allowed": self.ok}


def verify_rho_image(entry: GalleryEntry, depth: int = 8, iterations: int = 1000) -> RhoImageReport:
    """Every sampled rotation number lies within its error bound of an allowed value."""
    allowed = entry.expected.get("rho_image")
    if not isinstance(allowed, list):
        raise ValueError(f"{entry.name} does not claim a finite rotation-number image")
    targets = [float(Fraction(v)) for v in allowed]
    words = distinct_words(entry.group, depth)
    observed, failures = set(), []
    for w in words:
        est = rotation_number(entry.group.word_map(w), iterations)
        dists = [min(abs(est.value - t), 1.0 - abs(est.value - t)) for t in targets]
        j = int(np.argmin(dists))
        if dists[j] > est.error_bound:
            failures.append({"word": entry.group.format_word(w), "rho": est.value})
        else:
            observed.add(allowed[j])
    obs = [v for v in allowed if v in observed]
    return RhoImageReport(list(allowed), obs, len(words), iterations, failures, not failures)


# -- the nondiscrete example built from a flat bump field ----------------------------------


@dataclass
class Remark44Report:
    n_words: int
    words_with_fixed_point: int
    minimal_set_size: int
    witness: dict
    classifications: dict
    finite_orbit: bool
    unresolved: list
    checks: dict

    @property
    def ok(self):
        return all(self.checks.values())

    def to_dict(self):
        return {"n_words": self.n_words, "words_with_fixed_point": self.words_with_fixed_point,
                "minimal_set_size": self.minimal_set_size, "witness": self.witness,
                "classifications": self.classifications, "finite_orbit": self.finite_orbit,
                "unresolved": self.unresolved, "checks": dict(self.checks)}


class NonzeroRotationError(RuntimeError):
    """A sampled word has certified nonzero rotation number."""


def _split(entry: GalleryEntry):
    flows = set(entry.config.get("flow_letters", []))
    rigid = [i for i, n in enumerate(entry.group.names) if n not in flows]
    flow = [i for i, n in enumerate(entry.group.names) if n in flows]
    return rigid, flow


def minimal_set_sample(entry: GalleryEntry, resolution: float = 1e-3, depth: int = 40):
    """Orbit sample of the rigid subgroup, seeded at a generator fixed point."""
    rigid, _ = _split(entry)
    sub = GroupPresentation([entry.group.generators[i] for i in rigid],
                            [entry.group.names[i] for i in rigid])
    seed = as_mobius(sub.generators[0]).fixed_points()[0]
    pts = orbit(sub, seed, depth, resolution=resolution, max_points=200_000).points
    return _dedup(pts, resolution)[1]


def random_words(group: GroupPresentation, count: int, max_len: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    letters = group.letters()
    words = []
    while len(words) < count:
        length = int(rng.integers(1, max_len + 1))
        w = []
        while len(w) < length:
            i, s = letters[int(rng.integers(len(letters)))]
            if w and w[-1] == (i, -s):
                continue
            w.append((i, s))
        words.append(tuple(w))
    return words


def has_fixed_point_on(F, pts, tol: float = 1e-9) -> bool:
    """Zero or sign change of the centred displacement between neighbouring sample points."""
    d = np.mod(np.asarray(F(pts), dtype=float) - pts + 0.5, 1.0) - 0.5
    if np.any(np.abs(d) <= tol):
        return True
    nd = np.roll(d, -1)
    return bool(np.any((d * nd < 0) & (np.abs(d) + np.abs(nd) < 0.5)))


def nondiscreteness_witness(entry: GalleryEntry, bound: int = 50, target: float = 1e-3,
                            n_grid: int = 4000):
    """Flow word ``p^m q^n`` with small C^1 distance to the identity."""
    _, flow = _split(entry)
    if len(flow) != 2:
        raise ValueError("entry needs exactly two flow letters")
    P, Q = (entry.group.generators[i] for i in flow)
    ratio = Q.t / P.t
    cands = []
    for n in range(-bound, bound + 1):
        for m in range(-bound, bound + 1):
            s = m + n * ratio
            if (m, n) != (0, 0) and abs(s) > 1e-12:
                cands.append((abs(s), m, n))
    cands.sort()
    a, b = P.field.a, P.field.b
    xs = np.linspace(a, b, n_grid)
    for s, m, n in cands[:20]:
        word = ((flow[0], 1 if m > 0 else -1),) * abs(m) + ((flow[1], 1 if n > 0 else -1),) * abs(n)
        F = entry.group.word_map(word)
        c0 = float(np.max(np.abs(np.asarray(F.disp(xs)))))
        c1 = float(np.max(np.abs(np.asarray(F.deriv(xs)) - 1.0)))
        if c0 + c1 < target:
            return {"m": m, "n": n, "time": s * P.t, "c1_distance": c0 + c1,
                    "word": entry.group.format_word(word)}
    return None


def verify_remark44(entry: GalleryEntry, word_budget: int = 200, max_len: int = 8, seed: int = 0,
                    depths=(9, 10, 11, 12), iterations: int = 10_000) -> Remark44Report:
    if entry.name != "remark44":
        raise ValueError("verify_remark44 needs the remark44 entry")
    C = minimal_set_sample(entry)
    words = random_words(entry.group, word_budget, max_len, seed)
    with_fix, unresolved = 0, []
    for w in words:
        F = entry.group.word_map(w)
        if has_fixed_point_on(F, C):
            with_fix += 1
            continue
        est = rotation_number(F, iterations)
        if est.error_bound < min(est.value, 1.0 - est.value):
            raise NonzeroRotationError(f"{entry.group.format_word(w)} has rotation number "
                                       f"{est.value:.6g} +- {est.error_bound:.1g}")
        unresolved.append(entry.group.format_word(w))
    witness = nondiscreteness_witness(entry)
    kinds = {d: classify(entry.group, depth=d).kind for d in depths}
    finite = find_finite_orbit(entry.group) is not None
    checks = {
        "every_word_fixes_a_point_of_minimal_set": with_fix == len(words),
        "nondiscreteness_witness_found": witness is not None,
        "exceptional_at_all_depths": all(k == "ExceptionalLikely" for k in kinds.values()),
        "no_finite_orbit": not finite,
    }
    return Remark44Report(len(words), with_fix, int(C.size), witness or {}, kinds, finite,
                          unresolved, checks)


# -- the group used to manufacture small rotation numbers ----------------------------------


def parabolic_limit_field(G: Mobius, p: float = 0.0):
    """Limit field of ``lambda_n (f^-n G f^n - id)`` for a parabolic ``G`` fixing ``p``.

    In the coordinate ``z = cot(pi (x - p))`` the element ``G`` is a translation
    ``z -> z + c``; the renormalized elements converge to the generator
    ``-c sin^2(pi (x - p)) / pi`` of that translation flow.
    """
    if G.kind() != "parabolic":
        raise ValueError("G must be parabolic")
    x = 0.3 + p
    z = 1.0 / math.tan(math.pi * (x - p))
    zg = 1.0 / math.tan(math.pi * (float(G(x)) - p))
    c = zg - z
    return lambda x, c=c: -c * np.sin(np.pi * (np.asarray(x, dtype=float) - p)) ** 2 / np.pi


def gstar_sequence(entry: GalleryEntry) -> RenormSequence:
    """``g_n = f^-n g f^n`` on the configured interval, with its closed-form limit."""
    r = entry.config["renorm"]
    group = entry.group
    fw = group.parse_word(r["conjugator"])
    gw = group.parse_word(r["element"])
    if len(fw) != 1 or len(gw) != 1:
        raise ValueError("conjugator and element must be single letters")
    f = group.word_map(fw)
    g = group.word_map(gw)
    p = float(r.get("fixed_point", 0.0))
    rate = 1.0 / float(f.deriv(p))
    if rate < 1.0:
        raise ValueError("conjugator must attract at the fixed point")
    G = as_mobius(g)
    return make_conjugation_sequence(f, g, rate, tuple(r["interval"]),
                                     limit=parabolic_limit_field(G, p),
                                     letters=(fw[0], gw[0]))


def local_c1_distance(entry: GalleryEntry, n: int, K=(0.05, 0.45), n_grid: int = 2000) -> float:
    """``sup_K |g_n - id| + sup_K |g_n' - 1|`` for the renormalized elements."""
    seq = gstar_sequence(entry)
    xs = np.linspace(K[0], K[1], n_grid)
    g = seq.g(n)
    return float(np.max(np.abs(np.asarray(g.disp(xs))))
                 + np.max(np.abs(np.asarray(g.disp_deriv(xs)))))


def verify_gstar(entry: GalleryEntry, n_list=(2, 4, 8, 16, 32)) -> dict:
    d = [local_c1_distance(entry, n) for n in n_list]
    return {"n": list(n_list), "c1_distance": d,
            "checks": {"renormalized_elements_tend_to_identity":
                       all(b < a for a, b in zip(d, d[1:])) and d[-1] < 1e-6}}


def bump_flatness(entry: GalleryEntry, order: int = 4) -> float:
    """Largest derivative (up to ``order``) of the bump fields at their support ends."""
    worst = 0.0
    for g in entry.group.generators:
        if isinstance(g, BumpFlowTime):
            fld = g.field
            ends = np.array([fld.a, fld.b, fld.a + 1e-3, fld.b - 1e-3])
            worst = max(worst, float(np.max(np.abs(fld.derivatives_at(ends, order)))))
    return worst
