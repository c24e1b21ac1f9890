import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circlegroups.core import Linear, LineMobius, Mobius, Polynomial, Rotation
from circlegroups.germs import GermError, basin, germ_info, koenigs_chart


def test_parabolic_germ_order_and_coefficient():
    info = germ_info(LineMobius(1, 0, 1, 1), 0.0)  # x / (1 + x) = x - x^2 + ...
    assert info.multiplier == pytest.approx(1.0, abs=1e-14)
    assert (info.order, info.coefficient) == (1, pytest.approx(-1.0, abs=1e-12))
    assert abs(info.slope_fit - 2) <= 0.05


def test_cubic_germ():
    info = germ_info(Polynomial([0, 1, 0, 1]), 0.0)
    assert (info.order, info.coefficient) == (2, pytest.approx(1.0))


def test_hyperbolic_germ_has_no_order():
    f = Mobius.hyperbolic(0.3, 0.7, 0.25)
    info = germ_info(f, 0.3)
    assert info.multiplier == pytest.approx(0.25, abs=1e-12)
    assert info.order is None


def test_non_fixed_point_rejected():
    with pytest.raises(GermError):
        germ_info(Rotation(0.3), 0.1)


def test_flat_germ_rejected():
    with pytest.raises(GermError):
        germ_info(Polynomial([0, 1] + [0] * 9 + [1]), 0.0)


def test_koenigs_linear_is_identity():
    chart = koenigs_chart(Linear(0.5), 0.0, 0.5)
    xs = np.linspace(-0.5, 0.5, 101)
    assert np.max(np.abs(chart.phi(xs) - xs)) <= 1e-14


def test_koenigs_closed_form():
    # f(x) = x/(2-x) has the chart x/(1-x): phi(f(x)) = x/(2(1-x)) = phi(x)/2
    f = LineMobius(1, 0, -1, 2)
    chart = koenigs_chart(f, 0.0, 0.25)
    xs = np.linspace(-0.25, 0.25, 512)
    assert chart.lam == pytest.approx(0.5, abs=1e-15)
    assert chart.defect() <= 1e-10
    assert np.max(np.abs(chart.phi(xs) - xs / (1 - xs))) <= 1e-12
    assert np.max(np.abs(chart.phi_inv(chart.phi(xs)) - xs)) <= 1e-9


def test_koenigs_mobius():
    f = Mobius.hyperbolic(0.3, 0.7, math.exp(-1))
    chart = koenigs_chart(f, 0.3, 0.1)
    assert chart.lam == pytest.approx(math.exp(-1), abs=1e-12)
    assert chart.defect() <= 1e-10
    # in the chart the map is linear
    xs = np.linspace(*chart.interval, 200)
    w = chart.phi(xs)
    inner = chart.phi(np.asarray(f(chart.phi_inv(w))))
    assert np.max(np.abs(inner - chart.lam * w)) <= 1e-9 * max(1.0, np.max(np.abs(w)))


def test_koenigs_inverts_repelling():
    chart = koenigs_chart(LineMobius(2, 0, 1, 1), 0.0, 0.1)  # multiplier 2 at 0
    assert chart.inverted and chart.lam == pytest.approx(0.5)


def test_koenigs_rejects_near_neutral():
    with pytest.raises(GermError):
        koenigs_chart(LineMobius(1, 0, 1, 1), 0.0, 0.1)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(-2, 2))
def test_koenigs_defect_property(lam, c):
    f = Polynomial([0, lam, c * lam * (1 - lam)])
    chart = koenigs_chart(f, 0.0, 0.05)
    assert chart.defect() <= 1e-10


def test_basin_linear():
    b = basin(Linear(0.5), 0.0, (-1, 1))
    assert b.lo == -1 and b.hi == 1 and not b.lo_closed and not b.hi_closed


def test_basin_parabolic_side():
    b = basin(LineMobius(1, 0, 1, 1), 0.0, (-0.5, 1.0))
    assert b.lo == pytest.approx(0.0, abs=1e-3)
    assert b.hi == pytest.approx(1.0)


def test_basin_hyperbolic_circle():
    f = Mobius.hyperbolic(0.3, 0.7, 0.5)
    b = basin(f, 0.3, (-0.3 + 1e-6, 0.7 - 1e-6))
    assert b.lo < -0.29 and b.hi > 0.69
