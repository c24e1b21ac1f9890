import dataclasses
import math

import numpy as np
import pytest

from circlegroups import gallery
from circlegroups.core import GroupPresentation, Rotation
from circlegroups.dynamics import BudgetExceeded, PreconditionError
from circlegroups.theorem12 import (BracketError, FamilyMember, RelationError, SmallRotationFamily,
                                    build_setup, compute_T, manufacture_family, verify_lemma42)

# In z = cot(pi x) the limit flow is a translation, so the critical time is the max over
# (0.14, 0.22] of cot(pi x) - cot(pi h(x)); computed at 40 digits with an independently
# assembled matrix for h.  The package takes a grid sup, hence slightly below.
T_ORACLE = 0.44947661988154228
# end-to-end run, recorded after the first computation
T_FROZEN = 0.4494766016679478
FAMILY_FROZEN = [
    ("h^-1,f^-6,g^-29,f^6", 0.08181426640780447),
    ("h^-1,f^-10,g^-463,f^10", 0.06991445590052608),
    ("h^-1,f^-9,g^-231,f^9", 0.05571403962067252),
    ("h^-1,f^-10,g^-461,f^10", 0.0362142854140131),
    ("h^-1,f^-11,g^-921,f^11", 0.020514250361923222),
]

ENTRY = gallery.load("gstar")
C = ENTRY.config["construction"]


@pytest.fixture(scope="module")
def setup():
    return build_setup(ENTRY.group, gallery.gstar_sequence(ENTRY), I0=C["I0"], t0=C["t0"], h=C["h"])


@pytest.fixture(scope="module")
def T(setup):
    return compute_T(setup)


@pytest.fixture(scope="module")
def family(setup, T):
    return manufacture_family(setup, T, 5, window_fraction=C["window_fraction"])


def test_setup_relations(setup):
    assert setup.kappa == 1 and (setup.a, setup.b) == (0.10, 0.22)
    assert ENTRY.group.format_word(setup.h) == "h"
    assert all(setup.checks.values())
    # flow image of I0 at t0 is disjoint from I0
    assert float(setup.phi(setup.a, setup.t0)) > setup.b


def test_critical_time(setup, T):
    assert T == pytest.approx(T_FROZEN, abs=1e-12)
    assert 0 <= T_ORACLE - T <= 1e-7
    assert 0 < T < setup.t0
    xs = np.linspace(setup.a, setup.b, 10_000)
    hx, pT = setup.h_lift(xs), setup.phi(xs, T)
    assert np.all(hx <= pT) and np.all(pT < hx + 1)
    assert float(pT[0]) < float(setup.h_lift(setup.b))


def test_critical_time_of_flow_map(setup):
    c = 0.3
    synth = dataclasses.replace(setup, h_lift=lambda x: setup.phi(x, c), checks={})
    assert compute_T(synth) == pytest.approx(c, abs=1e-9)


def test_critical_time_without_bracket(setup):
    high = dataclasses.replace(setup, h_lift=lambda x: setup.phi(x, setup.t0 + 0.1), checks={})
    with pytest.raises(BracketError):
        compute_T(high)


def test_family(family):
    got = [(ENTRY.group.format_word(m.word), m.rho) for m in family.members]
    for (w, r), (fw, fr) in zip(got, FAMILY_FROZEN):
        assert w == fw
        assert r == pytest.approx(fr, abs=1e-9)
    rhos = [m.rho for m in family.members]
    assert all(0 < r < 1 for r in rhos)
    assert all(b < a for a, b in zip(rhos, rhos[1:]))
    assert rhos[-1] < 0.05
    for m in family.members:
        assert m.error < m.rho / 10
        assert m.approx_error < m.tolerance
        assert all(m.checks.values())


def test_family_monotone_within_error(family):
    for p, q in zip(family.members, family.members[1:]):
        assert q.rho <= p.rho + p.error + q.error


def test_small_rotation_report(family):
    rep = verify_lemma42(family)
    assert rep.status == "pass" and rep.ok
    assert [r["i"] for r in rep.rows] == [1, 2, 3, 4, 5]


def test_empty_family(setup, T):
    fam = manufacture_family(setup, T, 0, window_fraction=C["window_fraction"])
    assert len(fam) == 0
    with pytest.raises(PreconditionError):
        verify_lemma42(fam)


def test_loose_tolerance_rejected(setup, T):
    with pytest.raises(RelationError) as exc:
        manufacture_family(setup, T, 2, tolerances=1.0, window_fraction=C["window_fraction"])
    assert "g_above_critical_flow" in exc.value.failed


def test_rotations_rejected():
    G = GroupPresentation([Rotation(math.sqrt(2) - 1), Rotation(0.25)])
    with pytest.raises(PreconditionError):
        build_setup(G, gallery.gstar_sequence(ENTRY), I0=(0.1, 0.2), t0=1.0)


def test_zero_budget():
    with pytest.raises(BudgetExceeded):
        build_setup(ENTRY.group, gallery.gstar_sequence(ENTRY), I0=C["I0"], t0=C["t0"],
                    word_budget=0, check_preconditions=False)


def _member(i, rho):
    return FamilyMember(i, 0.0, 1, 1, (), rho, 1e-4, 0.0, 1.0, {})


def test_constant_half_family_negative_control():
    rep = verify_lemma42(SmallRotationFamily([_member(i, 0.5) for i in range(1, 6)]))
    assert rep.checks["rho_in_open_unit"]
    assert rep.checks["rho_decreasing_within_error"]
    assert not rep.checks["rho_strictly_decreasing"]
    assert not rep.checks["rho_below_threshold"]
    assert rep.status == "fail"


def test_indistinguishable_from_zero_is_inconclusive():
    rep = verify_lemma42(SmallRotationFamily([_member(1, 0.3), _member(2, 5e-5)]))
    assert rep.status == "inconclusive" and rep.inconclusive == [2]
