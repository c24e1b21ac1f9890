import numpy as np
import pytest

from circlegroups.core import Linear, LineMobius, Polynomial
from circlegroups.germs import GermError
from circlegroups.renorm import (CauchyError, FlowExitError, HypothesisError, VectorField1D,
                                 affine_flow_family, flow, lemma_3_8_check, limit_vector_field,
                                 make_conjugation_sequence, make_hyperbolic_sequence,
                                 make_nakai_sequence, make_synthetic_sequence, prop39_pipeline,
                                 validate_lemma34_hypotheses, verify_flow_approximation)


def _parabolic():
    return make_nakai_sequence(LineMobius(1, 0, 1, 1), Polynomial([0, 1, 0, 1]), interval=(0.2, 0.6),
                               limit=lambda x: np.asarray(x, dtype=float) ** 2)


def _hyperbolic():
    return make_hyperbolic_sequence(Linear(0.5), Polynomial([0, 1, -1]))


def _parabolic_closed(n, x):
    # f^n(x) = x/(1+nx), g(y) = y + y^3, f^-n(z) = z/(1-nz)
    y = x / (1 + n * x)
    z = y + y ** 3
    return z / (1 - n * z)


def test_synthetic_constants_exact():
    seq = make_synthetic_sequence(lambda x: 1 + x ** 2, lambda x: 2 * x, (0.0, 0.5))
    rep = validate_lemma34_hypotheses(seq, [1, 10, 100])
    assert rep.ok
    assert (rep.A1, rep.A2, rep.A3) == (pytest.approx(1, abs=1e-12), pytest.approx(1.25, abs=1e-12),
                                        pytest.approx(1, abs=1e-12))


def test_hyperbolic_constants():
    rep = validate_lemma34_hypotheses(_hyperbolic(), [1, 5, 20])
    assert rep.ok
    assert rep.A1 == pytest.approx(0.0625, abs=1e-12)
    assert rep.A2 == pytest.approx(0.25, abs=1e-12)
    assert rep.A3 == pytest.approx(1.0, abs=1e-12)


def test_identity_sequence_fails():
    seq = make_synthetic_sequence(lambda x: 0 * x, lambda x: 0 * x)
    rep = validate_lemma34_hypotheses(seq, [1, 2, 3])
    assert not rep.ok and rep.A1 == 0.0
    with pytest.raises(ValueError):
        validate_lemma34_hypotheses(seq, [])


def test_hyperbolic_scaling_is_exact():
    seq = _hyperbolic()
    xs = seq.grid()
    ref = -xs ** 2
    for n in range(1, 41):
        assert np.max(np.abs(seq.scaled(n, xs) - ref)) <= 1e-11
        # the word f^-n g f^n against x - 2^-n x^2
        assert np.max(np.abs(np.asarray(seq.g(n)(xs)) - (xs - 2.0 ** -n * xs ** 2))) <= 1e-12


def test_hyperbolic_limit_field():
    X = limit_vector_field(_hyperbolic(), 30, cauchy_tol=1e-10)
    xs = np.linspace(0.25, 0.5, 77)
    assert np.max(np.abs(X(xs) + xs ** 2)) <= 1e-10


def test_parabolic_sequence_matches_closed_form():
    seq = _parabolic()
    assert seq.info == {} and seq.exponents["scaling"] == 1.0
    xs = seq.grid(200)
    for n in (10, 100):
        assert np.max(np.abs(np.asarray(seq.g(n)(xs)) - _parabolic_closed(n, xs))) <= 1e-12


def test_parabolic_limit_rate():
    seq = _parabolic()
    xs = seq.grid()
    err = {n: np.max(np.abs(n * (_parabolic_closed(n, xs) - xs) - xs ** 2)) for n in (200, 400)}
    pkg = {n: np.max(np.abs(seq.scaled(n, xs) - xs ** 2)) for n in (200, 400)}
    for n in err:
        assert pkg[n] == pytest.approx(err[n], rel=1e-6)
    assert pkg[400] <= 1e-2
    assert 1.6 <= pkg[200] / pkg[400] <= 2.4
    with pytest.raises(CauchyError):
        limit_vector_field(seq, 400, cauchy_tol=1e-6)


def test_parabolic_sequence_rejections():
    f = LineMobius(1, 0, 1, 1)
    with pytest.raises(HypothesisError):
        make_nakai_sequence(f, f)
    with pytest.raises((HypothesisError, GermError)):
        make_nakai_sequence(f, Linear(0.5))


def test_flow_closed_forms():
    X = VectorField1D.from_callable(lambda x: x ** 2, 0.0, 10.0)
    assert float(flow(X, 0.2, 1.0)) == pytest.approx(0.25, abs=1e-9)
    C = VectorField1D.from_callable(lambda x: 0 * x + 0.7, -10, 10)
    assert float(flow(C, 0.1, 2.0)) == pytest.approx(1.5, abs=1e-9)
    assert float(flow(X, 0.3, 0.0)) == 0.3
    with pytest.raises(FlowExitError):
        flow(X, 0.2, 5.0)


def test_flow_semigroup():
    X = VectorField1D.from_callable(lambda x: 1 + x ** 2, -5.0, 5.0)
    for x in (0.0, 0.3, -0.4):
        a = float(flow(X, x, 0.7))
        b = float(flow(X, float(flow(X, x, 0.3)), 0.4))
        assert abs(a - b) <= 2e-10
        assert a == pytest.approx(np.tan(np.arctan(x) + 0.7), abs=1e-9)


def test_flow_approximation_synthetic():
    seq = make_synthetic_sequence(lambda x: 0 * x + 1, lambda x: 0 * x, (0.0, 0.5))
    rep = verify_flow_approximation(seq, (0.0, 0.5), 0.3, [10, 100, 1000])
    assert rep.rows[-1]["error"] <= 1e-2 and rep.decreasing


def test_flow_approximation_parabolic():
    rep = verify_flow_approximation(_parabolic(), (0.2, 0.6), 0.5, [100, 300, 1000])
    assert rep.decreasing
    assert rep.rows[-1]["error"] <= 5e-3


def test_flow_approximation_hyperbolic():
    # phi^2 maps [0.25, 0.4] to [1/6, 2/9], disjoint from J0; step size is 2^-n
    assert 0.4 / (1 + 2 * 0.4) < 0.25
    rep = verify_flow_approximation(_hyperbolic(), (0.25, 0.4), 2.0, [2, 4, 8])
    errs = [r["error"] for r in rep.rows]
    assert rep.decreasing and errs[-1] <= 2e-4
    assert errs[1] / errs[2] >= 8


def test_linearized_hyperbolic_bounds():
    rep = lemma_3_8_check(0.5, Polynomial([0, 1, -1]), 0.5, 0.25, range(1, 30))
    assert rep.ok and rep.M1 == rep.M2 == 2.0
    assert (rep.lower, rep.upper, rep.deriv_bound) == (0.0625, 0.25, 1.0)
    assert max(r["equality_defect"] for r in rep.rows) <= 1e-12


def test_linearized_hyperbolic_rejections():
    with pytest.raises(HypothesisError):
        lemma_3_8_check(0.5, Polynomial([0, 1, 1]), 0.5, 0.25, [1])
    with pytest.raises(ValueError):
        lemma_3_8_check(0.5, Polynomial([0, 1, -1]), 0.25, 0.5, [1])


def test_selection_pipeline_half():
    seq, rep = prop39_pipeline(0.5, affine_flow_family(), range(5, 51))
    assert (rep.lower, rep.upper, rep.deriv_bound) == (0.09375, 0.625, 0.5)
    assert rep.ok
    for r in rep.rows:
        assert 0.09375 <= r.scaled_min and r.scaled_max <= 0.625 and r.scaled_deriv_max < 0.5
        assert r.conjugation_defect <= 1e-12
    assert validate_lemma34_hypotheses(seq, [5, 20, 50]).A1 >= 0.09375


def test_selection_pipeline_rejects_identity():
    with pytest.raises(HypothesisError):
        prop39_pipeline(0.5, lambda n: Linear(1.0), [5])


def test_selection_pipeline_inverts_negative():
    fam = affine_flow_family()
    _, rep = prop39_pipeline(0.5, lambda n: fam(n).inverse(), range(5, 11))
    assert all(r.inverted for r in rep.rows) and rep.ok


def test_conjugation_sequence():
    seq = make_conjugation_sequence(Linear(0.5), Polynomial([0, 1, -1]), 2.0, (0.25, 0.5))
    xs = seq.grid()
    assert np.max(np.abs(seq.scaled(12, xs) + xs ** 2)) <= 1e-11
    with pytest.raises(ValueError):
        make_conjugation_sequence(Linear(0.5), Polynomial([0, 1, -1]), 1.0, (0.25, 0.5))
