import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seelab.errors import DomainError
from seelab.gauge import (GaugeParams, PolyWeight, SmoothFunctional, TestPair, canonical_gauge,
                          gauge_g_eval, gauge_value, metric_d, upsilon,
                          upsilon_field, upsilon_gauge)
from seelab.gauge import testpair_eval as pair_eval
from seelab.spectral import BlockOperator, dirichlet_laplacian

small = st.floats(-2.0, 2.0, allow_nan=False)


def test_upsilon_hand_value():
    op = dirichlet_laplacian(1)
    # earlier point (0.1, 2) transported to 0.3 and compared with 0.5
    moved = 2.0 * math.exp(-(math.pi**2) * 0.2)
    assert upsilon((0.1, [2.0]), (0.3, [0.5]), op) == pytest.approx(0.04 + (moved - 0.5) ** 4, rel=1e-14)


def test_upsilon_field_matches_pointwise(rng):
    op = dirichlet_laplacian(3)
    times = np.array([0.0, 0.2, 0.5])
    states = rng.normal(size=(4, 3))
    anchor = (0.2, rng.normal(size=3))
    F = upsilon_field(op, times, states, anchor)
    for i, s in enumerate(times):
        for j in range(4):
            assert F[i, j] == pytest.approx(upsilon((s, states[j]), anchor, op), rel=1e-12)


@given(small, small, st.floats(0, 1), st.floats(0, 1))
def test_upsilon_symmetric_and_zero_on_orbit(x, y, t, s):
    op = dirichlet_laplacian(1)
    assert upsilon((t, [x]), (s, [y]), op) == pytest.approx(upsilon((s, [y]), (t, [x]), op), rel=1e-12)
    later = max(t, s)
    orbit = op.semigroup(later - t, np.array([x]))
    assert upsilon((t, [x]), (later, orbit), op) == pytest.approx((later - t) ** 2, abs=1e-24)


def test_metric_d():
    assert metric_d((0.0, [3.0, 4.0]), (0.5, [0.0, 0.0])) == pytest.approx(5.5)


def test_gauge_derivatives_against_finite_differences():
    op = dirichlet_laplacian(2)
    gp = GaugeParams(0.1, np.array([0.4, -0.2]), op, 4)
    t, x = 0.3, np.array([0.5, 0.7])
    gv = gauge_g_eval(gp, t, x)
    h = 1e-6
    fd_t = (gauge_value(gp, t + h, x) - gauge_value(gp, t - h, x)) / (2 * h)
    assert gv.dt == pytest.approx(float(fd_t), rel=1e-6)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (gauge_value(gp, t, x + e) - gauge_value(gp, t, x - e)) / (2 * h)
        assert gv.grad[i] == pytest.approx(float(fd), rel=1e-6)
        fdg = (gauge_g_eval(gp, t, x + e).grad - gauge_g_eval(gp, t, x - e).grad) / (2 * h)
        np.testing.assert_allclose(gv.hess[i], fdg, rtol=1e-5)


def test_anchor_before_time_required():
    op = dirichlet_laplacian(1)
    with pytest.raises(DomainError):
        GaugeParams(0.5, [0.0], op).orbit(0.2)
    with pytest.raises(DomainError):
        GaugeParams(0.0, [0.0], op, power=3)


@pytest.mark.parametrize("op", [BlockOperator(np.zeros(2), np.array([math.pi, 2 * math.pi])),
                                dirichlet_laplacian(3)])
def test_orbit_derivative_bound(op):
    """d_t^o g is exact for an isometric group and an upper bound for a contraction."""
    rng = np.random.default_rng(3)
    anchors = [(0.0, rng.normal(size=op.dim)), (0.05, rng.normal(size=op.dim))]
    g = canonical_gauge(op, 0.1, rng.normal(size=op.dim), quartic=PolyWeight((0.2, 0.5), 0.1),
                        delta=0.3, anchors=anchors, weights=[0.5, 0.25])
    t, x = 0.4, rng.normal(size=op.dim)
    _, dto, _, _, _ = g.evaluate(t, x)
    h = 1e-6
    fd = float((g.value(t + h, op.semigroup(h, x)) - g.value(t, x)) / h)
    if isinstance(op, BlockOperator):
        assert fd == pytest.approx(dto, rel=1e-4, abs=1e-5)
    else:
        assert fd <= dto + 1e-5


def test_truncation_records_tail():
    op = dirichlet_laplacian(1)
    anchors = [(0.0, [float(i)]) for i in range(40)]
    weights = [2.0**-i for i in range(40)]
    g = upsilon_gauge(op, anchors, weights, 0.5, truncation=32)
    assert g.tail_weight == pytest.approx(sum(weights[32:]))
    assert len(g.terms) == 64


def test_polyweight_rejects_negative():
    with pytest.raises(DomainError):
        PolyWeight((-1.0,))
    w = PolyWeight((1.0, 2.0, 3.0), 0.5)
    assert w(1.5) == pytest.approx(6.0)
    assert w.derivative(1.5) == pytest.approx(8.0)


def test_testpair_eval_pairing():
    op = dirichlet_laplacian(2)
    phi = SmoothFunctional(value=lambda t, x: t * np.sum(x, axis=-1), dt=lambda t, x: float(np.sum(x)),
                           grad=lambda t, x: np.full(2, t), hess=lambda t, x: np.zeros((2, 2)))
    g = canonical_gauge(op, 0.0, np.zeros(2), delta=1.0)
    tp = TestPair(phi, g, op)
    x = np.array([1.0, 2.0])
    v = pair_eval(tp, 0.5, x)
    assert v.astar_pairing == pytest.approx(0.5 * float(op.apply(x).sum()))
    assert v.value == pytest.approx(1.5 + float(g.value(0.5, x)))
    with pytest.raises(DomainError):
        pair_eval(TestPair(phi, canonical_gauge(op, 0.3, np.zeros(2), delta=1.0), op, 0.3), 0.1, x)


@given(arrays(np.float64, 2, elements=small), st.floats(0.0, 1.0))
def test_gauge_nonnegative(x, t):
    op = dirichlet_laplacian(2)
    g = canonical_gauge(op, 0.0, np.ones(2), quartic=PolyWeight.constant(1.0), delta=0.5,
                        anchors=[(0.0, np.zeros(2))], weights=[1.0])
    assert g.value(t, x) >= 0
