import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seelab.bsde import RegressionBasis, backward_semigroup, grid_index, solve_bsde
from seelab.errors import ConfigError, DomainError, RegressionWarning, ShapeError
from seelab.problems import build_ou
from seelab.simulate import ControlProblem, simulate_see
from seelab.spectral import SpectralOperator


def _linear_problem(lam=-1.0, noise=0.5, rho=0.0, phi=None):
    op = SpectralOperator([lam])
    return ControlProblem(
        op, (0,),
        b=lambda t, X, u: np.zeros_like(X),
        sigma=lambda t, X, u: np.full((X.shape[0], 1, 1), noise),
        q=lambda t, X, y, z, u: -rho * y,
        phi_terminal=phi or (lambda X: X[:, 0]),
        lip_const=max(rho, 1.0), horizon=1.0, noise_dim=1)


def test_regression_reproduces_quadratic(rng):
    X = rng.normal(size=(500, 2))
    y = 1 + 2 * X[:, 0] - X[:, 1] + 3 * X[:, 0] * X[:, 1] + 0.5 * X[:, 1] ** 2
    f = RegressionBasis(degree=2).fit(X, y)
    np.testing.assert_allclose(f(X), y, atol=1e-6)


def test_basis_size():
    assert RegressionBasis(degree=2).size(16) == 15  # 4 coordinates
    assert RegressionBasis(degree=3, n_coeffs=2).size(5) == 10


def test_degenerate_ensemble_uses_mean():
    X = np.zeros((10, 3))
    f = RegressionBasis().fit(X, np.arange(10.0))
    np.testing.assert_allclose(f(X), 4.5)


def test_rank_deficient_warns(rng):
    x = rng.normal(size=200)
    X = np.column_stack([x, 2 * x])
    with pytest.warns(RegressionWarning):
        RegressionBasis(degree=1).fit(X, x)


def test_shape_checks():
    with pytest.raises(ShapeError):
        RegressionBasis().fit(np.zeros((5, 1)), np.zeros(4))


def test_config_guards():
    prob = _linear_problem(rho=20.0)
    b = simulate_see(prob, 0.0, [0.0], n_steps=8, n_paths=100)
    with pytest.raises(ConfigError, match="L\\*dt"):
        solve_bsde(b, prob)
    prob = _linear_problem()
    b = simulate_see(prob, 0.0, [0.0], n_steps=8, n_paths=20)
    with pytest.raises(ConfigError, match="basis size"):
        solve_bsde(b, prob)


def test_discount_oracle():
    # phi = 1 and q = -rho y give (1 + rho dt)^(-K) under the implicit step
    rho, K = 0.7, 16
    prob = _linear_problem(rho=rho, phi=lambda X: np.ones(X.shape[0]))
    b = simulate_see(prob, 0.0, [0.2], n_steps=K, n_paths=256)
    pair = solve_bsde(b, prob)
    assert pair.value == pytest.approx((1 + rho / K) ** -K, rel=1e-9)


def test_linear_terminal_mean_and_z():
    lam, noise, K = -1.0, 0.5, 32
    prob = _linear_problem(lam, noise)
    b = simulate_see(prob, 0.0, [1.0], n_steps=K, n_paths=8192, seed=3)
    pair = solve_bsde(b, prob)
    assert pair.value == pytest.approx(float(b.paths[-1, :, 0].mean()), abs=1e-7)
    assert abs(pair.value - np.exp(lam)) < 4 * pair.stderr
    # Z_k = sigma e^{lam (T - t_k)} for the exponential Euler scheme; each step has
    # ~12% relative noise at this ensemble size, so compare the pooled ratio
    oracle = noise * np.exp(lam * (1.0 - b.times[:-1]))
    ratio = pair.Z[:, :, 0].mean(axis=1) / oracle
    assert ratio.mean() == pytest.approx(1.0, abs=4 * ratio.std(ddof=1) / np.sqrt(K))


def test_grid_index():
    times = np.linspace(0, 1, 5)
    assert grid_index(times, 0.5) == 2
    with pytest.raises(DomainError):
        grid_index(times, 0.3)


def test_backward_semigroup_stops_early():
    prob = build_ou()
    b = simulate_see(prob, 0.0, [0.5], n_steps=8, n_paths=200)
    y = backward_semigroup(b, prob, RegressionBasis(), b.paths[-1, :, 0] ** 2, 0.5)
    assert y.shape == (200,)
    assert np.all(np.isfinite(y))


_bundle_cache = {}


def _bundle():
    if "b" not in _bundle_cache:
        prob = _linear_problem()
        _bundle_cache["b"] = (prob, simulate_see(prob, 0.0, [0.1], n_steps=8, n_paths=400, seed=8))
    return _bundle_cache["b"]


@given(st.floats(-3, 3), st.floats(-5, 5))
def test_linearity_in_terminal(a, c):
    prob, b = _bundle()
    z1 = b.paths[-1, :, 0]
    z2 = np.cos(z1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegressionWarning)
        y = solve_bsde(b, prob, terminal=a * z1 + z2 + c).Y[0]
        y1 = solve_bsde(b, prob, terminal=z1).Y[0]
        y2 = solve_bsde(b, prob, terminal=z2).Y[0]
    np.testing.assert_allclose(y, a * y1 + y2 + c, atol=1e-6 * (1 + abs(a) + abs(c)))
