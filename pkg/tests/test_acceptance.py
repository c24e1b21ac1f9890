"""One test per acceptance criterion, each reporting a PASS/FAIL line with its measurements."""

import json
import math
import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np

from circlegroups import gallery
from circlegroups.cli import main
from circlegroups.core import Compose, Linear, LineMobius, Mobius, PerturbedRotation, Polynomial, Rotation
from circlegroups.dynamics import classify, gap_collapse
from circlegroups.germs import koenigs_chart
from circlegroups.renorm import (affine_flow_family, lemma_3_8_check, make_hyperbolic_sequence,
                                 make_nakai_sequence, prop39_pipeline, verify_flow_approximation)
from circlegroups.rotation import (check_semiconjugacy_invariance, circle_diff, detect_rational,
                                   rotation_number)

SEED = 2024


def _random_mobius(rng, lo=-3.0, hi=3.0):
    a, b, c = rng.uniform(lo, hi, 3)
    while abs(a) < 0.2:
        a = rng.uniform(lo, hi)
    return Mobius(a, b, c, (1 + b * c) / a)


def test_rotation_number_exactness(criterion):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for alpha in rng.uniform(-3, 3, 20):
        worst = max(worst, circle_diff(rotation_number(Rotation(alpha), 1000).value, alpha % 1.0))
    half = abs(rotation_number(Mobius(0, -1, 1, 0), 1000).value - 0.5)
    criterion(1, worst <= 1e-12 and half <= 1e-12,
              f"rigid rotations max |err| = {worst:.2e}, half-turn |err| = {half:.2e} (tol 1e-12)")


def test_a_priori_bound(criterion):
    rng = np.random.default_rng(SEED + 1)
    N, worst, slack = 10_000, 0.0, math.inf
    for _ in range(20):
        F = PerturbedRotation(rng.uniform(0, 1), rng.uniform(-0.9, 0.9), int(rng.integers(1, 4)))
        d = circle_diff(rotation_number(F, N).value, rotation_number(F, 10 * N).value)
        worst = max(worst, d)
        slack = min(slack, 1 / N + 1 / (10 * N) - d)
    criterion(2, slack >= 0, f"max |rho_N - rho_10N| = {worst:.2e} <= {1 / N + 1 / (10 * N):.2e}")


def test_fixed_point_certificates(criterion):
    rng = np.random.default_rng(SEED + 2)
    mismatches = 0
    n_hyp = 0
    for _ in range(200):
        M = _random_mobius(rng)
        a, b, c, d = M.m
        hyper = abs(a + d) >= 2
        n_hyp += hyper
        cert = detect_rational(M)
        mismatches += (cert is not None and (cert.p, cert.q) == (0, 1)) != hyper
    bad_rational = 0
    for _ in range(20):
        q = int(rng.integers(1, 13))
        p = int(rng.integers(0, q))
        fr = Fraction(p, q)
        cert = detect_rational(Rotation(p / q), max_q=12)
        ok = cert is not None and (cert.p, cert.q) == (fr.numerator, fr.denominator) and \
            len(cert.orbit) == fr.denominator
        bad_rational += not ok
    criterion(3, mismatches == 0 and bad_rational == 0,
              f"Mobius certificate mismatches {mismatches}/200 ({n_hyp} with |tr| >= 2), "
              f"rational rotation failures {bad_rational}/20")


def test_semiconjugacy_invariance(criterion):
    rng = np.random.default_rng(SEED + 3)
    worst_conj = 0.0
    for i in range(20):
        f = PerturbedRotation(rng.uniform(0, 1), rng.uniform(-0.5, 0.5), int(rng.integers(1, 3)))
        if i % 2:
            h = _random_mobius(rng, 0.5, 2.0)
        else:
            h = PerturbedRotation(0.0, rng.uniform(-0.6, 0.6), int(rng.integers(1, 3)))
        rep = check_semiconjugacy_invariance(f, h, Compose([h, f, h.inverse()]), iterations=1_000_000)
        worst_conj = max(worst_conj, rep.delta_rho)
    G = gallery.load("schottky2").group
    res = gap_collapse(G, classify(G, depth=10), resolution=1e-4)
    worst_psi = worst_grp = 0.0
    for w in gallery.random_words(G, 20, 8, seed=1):
        a = rotation_number(G.word_map(w), 10_000).value
        worst_psi = max(worst_psi, circle_diff(a, rotation_number(res.psi(G.word_map(w)), 10_000).value))
        worst_grp = max(worst_grp, circle_diff(a, rotation_number(res.group.word_map(w), 10_000).value))
    ok = worst_conj <= 2e-6 and worst_psi <= 2e-4 and worst_grp <= 2e-4
    criterion(4, ok, f"conjugated pairs max |d rho| = {worst_conj:.2e} (tol 2e-6); Schottky collapse "
                     f"max |d rho| = {worst_psi:.2e} conjugated words, {worst_grp:.2e} collapsed "
                     f"generators (tol 2e-4)")


def test_hyperbolic_renormalization(criterion):
    seq = make_hyperbolic_sequence(Linear(0.5), Polynomial([0, 1, -1]))
    xs = seq.grid(512)
    worst = max(float(np.max(np.abs(seq.scaled(n, xs) + xs ** 2))) for n in range(1, 41))
    rep = lemma_3_8_check(0.5, Polynomial([0, 1, -1]), 0.5, 0.25, range(1, 41), grid=512)
    eq = max(r["equality_defect"] for r in rep.rows)
    criterion(5, worst <= 1e-11 and rep.ok and eq <= 1e-12,
              f"scaling defect {worst:.2e} (tol 1e-11), two-sided bounds hold: {rep.ok}, "
              f"conjugation equality defect {eq:.2e} (tol 1e-12)")


def test_parabolic_limit_field(criterion):
    seq = make_nakai_sequence(LineMobius(1, 0, 1, 1), Polynomial([0, 1, 0, 1]), interval=(0.2, 0.6))
    xs = seq.grid(512)
    e200, e400 = (float(np.max(np.abs(seq.scaled(n, xs) - xs ** 2))) for n in (200, 400))
    ratio = e200 / e400
    criterion(6, e400 <= 1e-2 and 1.6 <= ratio <= 2.4,
              f"error at n=400 {e400:.3e} (tol 1e-2), ratio 200/400 = {ratio:.3f} (in [1.6, 2.4])")


def test_flow_approximation(criterion):
    seq = make_nakai_sequence(LineMobius(1, 0, 1, 1), Polynomial([0, 1, 0, 1]), interval=(0.2, 0.6),
                              limit=lambda x: np.asarray(x, dtype=float) ** 2)
    rep = verify_flow_approximation(seq, (0.2, 0.6), 0.5, [100, 300, 1000])
    errs = [r["error"] for r in rep.rows]
    criterion(7, errs[-1] <= 5e-3 and rep.decreasing,
              "errors at n = 100, 300, 1000: " + ", ".join(f"{e:.3e}" for e in errs) + " (tol 5e-3)")


def test_koenigs(criterion):
    chart = koenigs_chart(LineMobius(1, 0, -1, 2), 0.0, 0.25)
    xs = np.linspace(-0.25, 0.25, 1001)
    defect = chart.defect()
    rt = float(np.max(np.abs(chart.phi_inv(chart.phi(xs)) - xs)))
    criterion(8, defect <= 1e-10 and rt <= 1e-9,
              f"linearization defect {defect:.2e} (tol 1e-10), round trip {rt:.2e} (tol 1e-9)")


def test_selection_pipeline(criterion):
    _, rep = prop39_pipeline(0.5, affine_flow_family(), range(5, 51), grid=512)
    lo = min(r.scaled_min for r in rep.rows)
    hi = max(r.scaled_max for r in rep.rows)
    dv = max(r.scaled_deriv_max for r in rep.rows)
    ok = rep.ok and len(rep.rows) == 46 and 0.09375 <= lo and hi <= 0.625 and dv < 0.5
    criterion(9, ok, f"k_n found for n = 5..50, scaled range [{lo:.4f}, {hi:.4f}] within "
                     f"[0.09375, 0.625], derivative max {dv:.4f} < 0.5")


def test_small_rotation_numbers(criterion, capsys, tmp_path):
    t = time.perf_counter()
    code = main(["thm12-demo", "--config", "gallery_gstar.json", "--count", "5",
                 "--out", str(tmp_path / "family.json")])
    elapsed = time.perf_counter() - t
    capsys.readouterr()
    doc = json.loads((tmp_path / "family.json").read_text())
    mem = doc["family"]["members"]
    rhos = [m["rho"] for m in mem]
    sep = all(q["rho"] + q["error"] < p["rho"] - p["error"] for p, q in zip(mem, mem[1:]))
    unit = all(m["error"] < m["rho"] < 1 - m["error"] for m in mem)
    ok = (code == 0 and len(mem) == 5 and sep and unit and rhos[-1] < 0.05
          and all(doc["checks"].values()) and elapsed <= 180)
    criterion(10, ok, "rho = " + ", ".join(f"{r:.4f}" for r in rhos)
              + f"; {sum(doc['checks'].values())}/{len(doc['checks'])} relation checks; {elapsed:.1f} s")


def test_flat_bump_example(criterion):
    rep = gallery.verify_remark44(gallery.load("remark44"), word_budget=200, max_len=8)
    wit = rep.witness
    ok = rep.ok and rep.words_with_fixed_point == rep.n_words == 200
    criterion(11, ok, f"{rep.words_with_fixed_point}/{rep.n_words} words fix a point of the sampled "
                      f"minimal set; witness {wit.get('word')} C1 distance {wit.get('c1_distance', math.nan):.1e}; "
                      f"classifications {rep.classifications}")


def _artifacts(outdir):
    env = dict(os.environ, CIRCLEGROUPS_OUTDIR=str(outdir))
    cmds = [
        ["--seed", "7", "thm12-demo", "--config", "gallery_gstar.json", "--count", "5", "--out", "family.json"],
        ["--seed", "7", "thm12-demo", "--config", "gallery_gstar.json", "--count", "5", "--out", "family.csv"],
        ["classify", "--config", "gallery_schottky2.json", "--depth", "9", "--out", "classify.json"],
        ["contract", "--config", "gallery_psl2z.json", "--arc", "0.1,0.1", "--max-word-len", "12",
         "--out", "contract.json"],
        ["renorm", "--fixture", "nakai", "--out", "nakai.csv"],
        ["renorm", "--fixture", "prop39", "--out", "prop39.json"],
        ["gallery", "psl2z", "--verify", "--out", "psl2z.json"],
    ]
    for c in cmds:
        subprocess.run([sys.executable, "-m", "circlegroups.cli", *c], env=env, check=False,
                       capture_output=True)
    return {p.name: p.read_bytes() for p in sorted(outdir.iterdir())}


def test_determinism(criterion, tmp_path):
    a = _artifacts(tmp_path / "a")
    b = _artifacts(tmp_path / "b")
    same = [k for k in a if b.get(k) == a[k]]
    ok = len(a) == 7 and set(a) == set(b) and len(same) == len(a)
    criterion(12, ok, f"{len(same)}/{len(a)} artifacts byte-identical across two runs "
                      f"({', '.join(sorted(a))})")
