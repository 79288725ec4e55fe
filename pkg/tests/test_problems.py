import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from seelab.errors import ArgumentError
from seelab.problems import (PRESETS, LqSpec, QWienerSpec, ReactionSpec, SineGrid, audit_assumptions,
                             build_hyperbolic, build_lq_benchmark, build_parabolic, default_reaction,
                             preset, riccati_flow)


def _partial(alpha, lo, hi):
    i = np.arange(lo + 1, hi + 1, dtype=float)
    return float((i**-alpha).sum())


def test_power_law_trace_and_tail():
    q = QWienerSpec.power_law(3.0, 16)
    # zeta(3) from a long partial sum with an integral remainder
    zeta3 = _partial(3.0, 0, 10**6) + 0.5e-12
    assert q.trace() == pytest.approx(zeta3, rel=1e-12)
    assert q.tail(16) == pytest.approx(zeta3 - _partial(3.0, 0, 16), rel=1e-9)
    with pytest.raises(ArgumentError):
        QWienerSpec.power_law(1.0, 4)


def test_sine_grid_round_trip(rng):
    g = SineGrid(10)
    X = rng.normal(size=(3, 10))
    np.testing.assert_allclose(g.analyze(g.synthesize(X)), X, atol=1e-12)
    assert g.integrate(np.ones(g.n_points)) == pytest.approx(1.0)


def _constant_h(c):
    base = default_reaction()
    return ReactionSpec(base.f, lambda t, xi, y, u: np.full_like(y, c), base.alpha, base.beta, 1.0,
                        "constant-h", h_sup=c)


def test_tail_oracle_constant_noise():
    # with h = c the projected noise is c * diag(sqrt(q)), so the ladder is
    # c^2 sum_{n < i <= 126} q_i plus the 2 c^2 sum_{i > 126} q_i remainder bound
    c = 0.3
    prob = build_parabolic(_constant_h(c), N=16)
    rep = audit_assumptions(prob, n_probes=5, tail_levels=[4, 16])
    q = QWienerSpec.power_law(3.0, 126)
    expected = [c * c * (_partial(3.0, n, 126) + 2 * q.tail(126)) for n in (4, 16)]
    np.testing.assert_allclose(rep.tail_values, expected, rtol=1e-10)
    assert rep.tail_values[1] >= c * c * q.tail(16)


def test_parabolic_shapes_and_hs_bound(rng):
    prob = build_parabolic(N=6)
    X = rng.normal(size=(4, 6))
    assert prob.b(0.0, X, 0.0).shape == (4, 6)
    s = prob.sigma(0.0, X, 1.0)
    assert s.shape == (4, 6, 6)
    for x, sx in zip(X, s):
        assert (sx**2).sum() <= prob.meta["hs_bound"](x)


def test_hyperbolic_layout():
    prob = build_hyperbolic(N=4)
    assert prob.dim == 8
    X = np.zeros((2, 8))
    assert np.all(prob.b(0.0, X, 0.0)[:, :4] == 0)
    assert np.all(prob.sigma(0.0, X, 0.0)[:, :4] == 0)


@pytest.mark.parametrize("name", ["parabolic", "hyperbolic", "ou", "lq", "lq2"])
def test_presets_pass_audit(name):
    rep = audit_assumptions(preset(name), n_probes=40)
    assert rep.passed, rep.violations
    assert rep.tail_decreasing


def test_audit_flags_understated_constant():
    prob = build_parabolic(N=4)
    small = prob.__class__(**{**prob.__dict__, "lip_const": 0.05})
    assert not audit_assumptions(small, n_probes=20).passed


def test_unknown_preset():
    with pytest.raises(ArgumentError):
        preset("nope")
    assert set(PRESETS) >= {"ou", "parabolic", "hyperbolic", "lq", "heat"}


def test_lq_rejects_bad_specs():
    with pytest.raises(ArgumentError):
        build_lq_benchmark(LqSpec(eigenvalues=(-1.0, -2.0, -3.0), sigma=np.eye(3), R=np.eye(3), G=np.eye(3)))
    with pytest.raises(ArgumentError):
        build_lq_benchmark(LqSpec(G=-np.eye(1)))


def test_riccati_matches_independent_ode():
    """Scalar case: V = -P x^2 / 2 + r with the control chosen pointwise."""
    prob, cand = build_lq_benchmark()
    s = prob.meta["spec"]
    lam, sig2 = s.eigenvalues[0], float(s.sigma[0, 0]) ** 2

    def rhs(t, v):
        P, r = v
        m = max(-0.5 * a * a * sig2 * P + c for a, c in zip(s.scales, s.rewards))
        return [-2 * lam * P - 1.0 + s.rho * P, -m + s.rho * r]

    sol = solve_ivp(rhs, (1.0, 0.0), [1.0, 0.0], rtol=1e-12, atol=1e-14, dense_output=True)
    for t in (0.0, 0.25, 0.6, 0.9):
        for x in (-2.0, 0.3, 1.5):
            P, r = sol.sol(t)
            assert cand.value(t, np.array([x])) == pytest.approx(-0.5 * P * x * x + r, abs=1e-10)


def test_riccati_switch_continuity():
    spec = LqSpec(rewards=(0.0, 0.08))  # tie at P = 2/3, near t = 0.675
    flow = riccati_flow(spec)
    assert flow.switch_times, "expected at least one control switch"
    for ts in flow.switch_times:
        a, b = flow.state(ts - 1e-9), flow.state(ts + 1e-9)
        assert a[2] == pytest.approx(b[2], abs=1e-8)


_, LQ2 = build_lq_benchmark(LqSpec.two_dim())


@given(st.floats(0.0, 0.99), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_lq2_value_concave(t, x1, x2):
    H = LQ2.hess(t, np.array([x1, x2]))
    assert np.all(np.linalg.eigvalsh(H) <= 1e-12)
