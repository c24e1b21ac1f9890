import itertools

import numpy as np
import pytest

from circlegroups import gallery
from circlegroups.core import Mobius
from circlegroups.rotation import circle_diff, rotation_number


def _angle(m, x):
    c, s = np.cos(np.pi * x), np.sin(np.pi * x)
    return np.arctan2(m[1, 0] * c + m[1, 1] * s, m[0, 0] * c + m[0, 1] * s) / np.pi


def test_load_and_unknown():
    for name in gallery.NAMES:
        e = gallery.load(name)
        assert e.name == name and e.group.generators
    with pytest.raises(KeyError):
        gallery.load("nope")
    psl = gallery.load("psl2z").group
    assert [g.m for g in psl.generators] == [(0, -1, 1, 0), (1, 1, 0, 1)]


def test_config_file_fallback(tmp_path):
    assert gallery.load_config("gallery_gstar.json").name == "gstar"
    p = tmp_path / "g.json"
    p.write_text('{"generators": [{"name": "r", "type": "rotation", "alpha": "1/4"}]}')
    e = gallery.load_config(p)
    assert e.name == "g" and e.group.names == ("r",)


def test_psl2z_rho_image():
    rep = gallery.verify_rho_image(gallery.load("psl2z"), depth=8)
    assert rep.ok and not rep.failures
    assert set(rep.observed) == {"0", "1/2", "1/3", "2/3"}


def test_psl2z_rotation_follows_trace():
    # elliptic elements of the modular group have trace 0 (order 2) or +-1 (order 3)
    S, T = np.array([[0, -1], [1, 0]]), np.array([[1, 1], [0, 1]])
    mats = {(0, 1): S, (0, -1): -S, (1, 1): T, (1, -1): np.array([[1, -1], [0, 1]])}
    G = gallery.load("psl2z").group
    for n in range(1, 6):
        for w in itertools.product(list(mats), repeat=n):
            m = np.eye(2, dtype=int)
            for l in w:
                m = m @ mats[l]
            tr = abs(int(np.trace(m)))
            rho = rotation_number(G.word_map(w), 1000).value
            if tr >= 2:
                assert min(rho, 1 - rho) <= 1e-3
            elif tr == 0:
                assert circle_diff(rho, 0.5) <= 1e-3
            else:
                assert min(circle_diff(rho, 1 / 3), circle_diff(rho, 2 / 3)) <= 1e-3


def test_schottky_rho_image():
    rep = gallery.verify_rho_image(gallery.load("schottky2"), depth=6)
    assert rep.ok and rep.observed == ["0"]


def test_gstar_has_no_finite_image_claim():
    with pytest.raises(ValueError):
        gallery.verify_rho_image(gallery.load("gstar"))


def test_gstar_renormalized_elements_shrink():
    e = gallery.load("gstar")
    rep = gallery.verify_gstar(e)
    assert rep["checks"]["renormalized_elements_tend_to_identity"]
    # f^-n g^-1 f^n is the unipotent matrix [[1, -2^-n], [0, 1]]
    xs = np.linspace(0.05, 0.45, 2000)
    for n, d in zip(rep["n"], rep["c1_distance"]):
        m = np.array([[1.0, -2.0 ** -n], [0.0, 1.0]])
        y = _angle(m, xs)
        h = 1e-6
        dy = (_angle(m, xs + h) - _angle(m, xs - h)) / (2 * h)
        ref = np.max(np.abs(y - xs)) + np.max(np.abs(dy - 1))
        assert d == pytest.approx(ref, rel=1e-5, abs=1e-9)


def test_parabolic_limit_field():
    v = gallery.parabolic_limit_field(Mobius(1, -1, 0, 1))
    xs = np.linspace(0.05, 0.8, 9)
    assert np.allclose(v(xs), np.sin(np.pi * xs) ** 2 / np.pi, atol=1e-14)
    with pytest.raises(ValueError):
        gallery.parabolic_limit_field(Mobius(2, 0, 0, 0.5))


def test_bump_flatness():
    assert gallery.bump_flatness(gallery.load("remark44")) <= 1e-8


def test_random_words_are_reduced_and_seeded():
    G = gallery.load("remark44").group
    w1 = gallery.random_words(G, 50, 8, seed=3)
    assert w1 == gallery.random_words(G, 50, 8, seed=3)
    for w in w1:
        assert 1 <= len(w) <= 8
        assert all(a != (b[0], -b[1]) for a, b in zip(w, w[1:]))


def test_flow_words_fix_minimal_set():
    e = gallery.load("remark44")
    C = gallery.minimal_set_sample(e)
    F = e.group.word_map(e.group.parse_word("p^3,q^-2"))
    out = C[(C <= 0.06) | (C >= 0.19)]
    assert out.size == C.size
    assert np.max(np.abs(np.asarray(F(out)) - out)) <= 1e-12


def test_rigid_words_fix_points_of_minimal_set():
    e = gallery.load("remark44")
    C = gallery.minimal_set_sample(e)
    for w in ("a", "b", "a,b", "a^2,b^-1,a^-1"):
        assert gallery.has_fixed_point_on(e.group.word_map(e.group.parse_word(w)), C)


def test_nondiscreteness_witness():
    wit = gallery.nondiscreteness_witness(gallery.load("remark44"))
    assert wit is not None and wit["c1_distance"] < 1e-3
    assert max(abs(wit["m"]), abs(wit["n"])) <= 50


def test_remark44_report():
    rep = gallery.verify_remark44(gallery.load("remark44"))
    assert rep.n_words >= 200
    assert rep.words_with_fixed_point == rep.n_words
    assert rep.ok, rep.checks
    with pytest.raises(ValueError):
        gallery.verify_remark44(gallery.load("psl2z"))
