import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from seelab.errors import DomainError, ShapeError
from seelab.spectral import (BlockOperator, SpectralOperator, YosidaOperator, adjoint_pair,
                             dirichlet_laplacian, norm, project, semigroup_apply,
                             yosida_semigroup_apply)

finite = st.floats(-1e3, 1e3, allow_nan=False)
times = st.floats(0.0, 5.0, allow_nan=False)


def test_laplacian_eigenvalues():
    op = dirichlet_laplacian(3)
    assert op.eigenvalues == pytest.approx([-math.pi**2, -4 * math.pi**2, -9 * math.pi**2], rel=1e-15)


def test_semigroup_matches_scalar_exponentials():
    op = dirichlet_laplacian(4)
    x = np.array([1.0, -2.0, 0.5, 3.0])
    t = 0.013
    oracle = [math.exp(-((i * math.pi) ** 2) * t) * xi for i, xi in enumerate(x, start=1)]
    np.testing.assert_allclose(semigroup_apply(op, t, x), oracle, rtol=1e-14)


def test_block_semigroup_matches_expm():
    op = BlockOperator(np.array([0.0, -0.3]), np.array([math.pi, 2 * math.pi]))
    x = np.array([0.3, -1.0, 2.0, 0.7])
    for t in (0.0, 0.1, 0.77):
        np.testing.assert_allclose(op.semigroup(t, x), expm(t * op.matrix()) @ x, atol=1e-13)


def test_apply_matches_matrix():
    op = BlockOperator(np.array([-1.0, 0.0]), np.array([3.0, 5.0]))
    x = np.arange(4.0)
    np.testing.assert_allclose(op.apply(x), op.matrix() @ x)


def test_yosida_eigenvalues():
    base = dirichlet_laplacian(3)
    y = YosidaOperator(50.0, base)
    lam = base.eigenvalues
    np.testing.assert_allclose(y.eigenvalues, 50.0 * lam / (50.0 - lam), rtol=1e-15)


def test_yosida_converges_to_semigroup():
    op = dirichlet_laplacian(5)
    x = np.ones(5)
    errs = [norm(yosida_semigroup_apply(op.yosida(mu), 0.1, x) - op.semigroup(0.1, x))
            for mu in (1e1, 1e2, 1e3, 1e4)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_block_yosida_stays_in_family():
    op = BlockOperator(np.zeros(2), np.array([1.0, 2.0]))
    y = op.yosida(10.0)
    z = 10.0 * 1j * op.freq / (10.0 - 1j * op.freq)
    np.testing.assert_allclose(y.generator.decay, z.real)
    np.testing.assert_allclose(y.generator.freq, z.imag)


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        dirichlet_laplacian(2).semigroup(-0.1, np.zeros(2))


def test_positive_eigenvalue_rejected():
    with pytest.raises(DomainError):
        SpectralOperator([0.5])


def test_project_split():
    head, tail = project(np.arange(5.0), 2)
    np.testing.assert_array_equal(head, [0.0, 1.0])
    np.testing.assert_array_equal(tail, [2.0, 3.0, 4.0])
    with pytest.raises(ShapeError):
        project(np.arange(3.0), 0)


@given(arrays(np.float64, 6, elements=finite), times)
def test_laplacian_contraction_exact(x, t):
    op = dirichlet_laplacian(6)
    assert norm(op.semigroup(t, x)) <= norm(x)


@given(arrays(np.float64, 6, elements=finite), times)
def test_block_isometry(x, t):
    # exact isometry only up to rounding in the rotation
    op = BlockOperator(np.zeros(3), np.pi * np.arange(1, 4))
    assert norm(op.semigroup(t, x)) <= norm(x) * (1 + 8 * np.finfo(float).eps)
    assert norm(op.semigroup(t, x)) == pytest.approx(norm(x), rel=1e-13, abs=1e-300)


@given(arrays(np.float64, 5, elements=finite), times, times)
def test_semigroup_law(x, s, t):
    op = dirichlet_laplacian(5)
    lhs = op.semigroup(s + t, x)
    rhs = op.semigroup(s, op.semigroup(t, x))
    assert norm(lhs - rhs) <= 1e-12 * max(norm(lhs), 1e-300) + 1e-300


@given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite))
def test_adjoint_pairing_symmetric_for_diagonal(x, y):
    op = dirichlet_laplacian(4)
    a, b = adjoint_pair(op, x, y), adjoint_pair(op, y, x)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-9)


@given(arrays(np.float64, 4, elements=finite))
def test_block_generator_dissipative(x):
    op = BlockOperator(np.array([-0.5, 0.0]), np.array([1.0, 7.0]))
    assert float(x @ op.apply(x)) <= 1e-9 * float(x @ x)
