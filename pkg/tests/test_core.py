import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circlegroups.core import (Arc, CirclePoint, GroupPresentation, Mobius, PerturbedRotation,
                               Rotation, circle_dist, derivative, eval_lift, group_from_dict,
                               invert_at, inverse_word, reduce_word, word_to_lift)

# angle of the projective image of (cos pi/4, sin pi/4) under [[1, 1], [0, 1]],
# computed independently at 40 digits
MOBIUS_T_AT_QUARTER = 0.14758361765043326


def test_rotation_lift_value():
    lift = word_to_lift(GroupPresentation([Rotation(1 / 3)]), [(0, 1)])
    assert eval_lift(lift, 0.9) == pytest.approx(0.9 + 1 / 3, abs=1e-15)


def test_identity_word():
    lift = word_to_lift(GroupPresentation([Rotation(0.3)]), [])
    xs = np.linspace(-1, 2, 7)
    assert np.allclose(eval_lift(lift, xs), xs, atol=0)


def test_parabolic_mobius_value():
    T = Mobius(1, 1, 0, 1)
    assert float(T(0.25)) == pytest.approx(MOBIUS_T_AT_QUARTER, abs=1e-15)
    assert MOBIUS_T_AT_QUARTER == pytest.approx(math.atan(0.5) / math.pi, abs=1e-16)


def test_derivative_examples():
    lift = word_to_lift(GroupPresentation([Mobius(1, 1, 0, 1)]), [(0, 1)])
    assert derivative(lift, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert float(Rotation(0.7).deriv(0.123)) == 1.0
    assert float(PerturbedRotation(0.3, 0.05, 1).deriv(0.0)) == pytest.approx(1.05, abs=1e-15)


def test_inverse_examples():
    assert float(Rotation(0.3).inverse()(0.5)) == pytest.approx(0.2, abs=1e-15)
    m = Mobius(2, 1, 1, 1)
    closed = Mobius(1, -1, -1, 2)
    ys = np.linspace(0.01, 0.99, 50)
    d = circle_dist(m.inverse()(ys), closed(ys))
    assert np.max(d) <= 1e-13
    F = PerturbedRotation(0.3, 0.05, 1)
    x = invert_at(word_to_lift(GroupPresentation([F]), [(0, 1)]), 0.5)
    assert abs(float(F(x)) - 0.5) <= 1e-12


def test_word_cancellation():
    G = GroupPresentation([Mobius(2, 1, 1, 1), PerturbedRotation(0.2, 0.3, 2)], ["g", "p"])
    xs = np.linspace(0, 1, 100)
    for w in ("g,g^-1", "p,p^-1", "g,p,p^-1,g^-1"):
        F = G.word_map(G.parse_word(w))
        assert np.max(np.abs(np.asarray(F(xs)) - xs)) <= 1e-12


def test_antipodal_map_is_half_turn():
    S = Mobius(0, -1, 1, 0)
    xs = np.linspace(0, 1, 11)
    lift = word_to_lift(GroupPresentation([S]), [(0, 1)])
    assert np.allclose(eval_lift(lift, xs), xs + 0.5, atol=1e-14)


def test_word_format_and_parse():
    G = GroupPresentation([Rotation(0.1), Rotation(0.2)], ["f", "g"])
    w = G.parse_word("f^-3,g,g,f^2")
    assert w == ((0, -1),) * 3 + ((1, 1),) * 2 + ((0, 1),) * 2
    assert G.format_word(w) == "f^-3,g^2,f^2"
    assert G.parse_word(G.format_word(w)) == w
    assert G.parse_word("") == ()
    with pytest.raises(KeyError):
        G.parse_word("h")


def test_long_runs_use_closed_powers():
    f = Mobius(math.sqrt(2), 0, 0, 1 / math.sqrt(2))
    G = GroupPresentation([f], ["f"])
    F = G.word_map(((0, 1),) * 40)
    x = 0.3
    y = x
    for _ in range(40):
        y = float(f(y))
    assert float(F(x)) == pytest.approx(y, abs=1e-12)


def test_reduce_and_inverse_words():
    w = ((0, 1), (1, 1), (1, -1), (0, 1))
    assert reduce_word(w) == ((0, 1), (0, 1))
    assert inverse_word(((0, 1), (1, -1))) == ((1, 1), (0, -1))


def test_arc_and_point():
    a = Arc.from_endpoints(0.9, 0.1)
    assert a.length == pytest.approx(0.2)
    assert bool(a.contains(0.95)) and bool(a.contains(1.05)) and not bool(a.contains(0.5))
    assert float(CirclePoint(-0.25)) == 0.75
    with pytest.raises(ValueError):
        Arc(0.1, 1.5)


def test_config_roundtrip():
    cfg = {"generators": [{"name": "s", "type": "mobius", "matrix": [0, -1, 1, 0]},
                          {"name": "r", "type": "rotation", "alpha": "1/3"}]}
    G = group_from_dict(cfg)
    assert G.names == ("s", "r")
    assert float(G.generators[1](0.0)) == pytest.approx(1 / 3)
    G2 = group_from_dict(G.to_dict())
    xs = np.linspace(0, 1, 9)
    for a, b in zip(G.generators, G2.generators):
        assert np.allclose(a(xs), b(xs), atol=1e-15)


def test_bad_perturbation_rejected():
    with pytest.raises(ValueError):
        PerturbedRotation(0.1, 1.2)


# -- properties ----------------------------------------------------------------------

sl2 = st.tuples(*[st.floats(-3, 3, allow_nan=False) for _ in range(3)]).filter(
    lambda t: abs(t[0]) > 0.5)


def _mobius(t):
    a, b, c = t
    # d chosen so that ad - bc = 1
    return Mobius(a, b, c, (1 + b * c) / a)


maps = st.one_of(
    st.floats(-2, 2).map(Rotation),
    st.tuples(st.floats(0, 1), st.floats(-0.9, 0.9), st.integers(1, 3)).map(
        lambda t: PerturbedRotation(*t)),
    sl2.map(_mobius),
)


@settings(max_examples=60, deadline=None)
@given(maps, st.floats(-3, 3))
def test_degree_one(F, x):
    assert float(F(x + 1)) - float(F(x)) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(maps)
def test_monotone(F):
    xs = np.linspace(0, 1, 400)
    assert np.all(np.diff(np.asarray(F(xs))) > 0)


@settings(max_examples=60, deadline=None)
@given(maps, st.floats(0, 1))
def test_derivative_matches_central_difference(F, x):
    h = 1e-6
    fd = (float(F(x + h)) - float(F(x - h))) / (2 * h)
    d = float(F.deriv(x))
    assert abs(fd - d) <= 1e-5 * max(1.0, d)


@settings(max_examples=40, deadline=None)
@given(maps, maps, st.floats(0, 1))
def test_composition_group_law(F, G, x):
    group = GroupPresentation([F, G], ["f", "g"])
    word = group.parse_word("f,g")
    direct = float(F(float(G(x))))
    assert float(group.word_map(word)(x)) == pytest.approx(direct, abs=1e-9)
    back = group.word_map(group.parse_word("g^-1,f^-1,f,g"))
    assert float(back(x)) == pytest.approx(x, abs=1e-9)
