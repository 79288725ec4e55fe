import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seelab.borwein_preiss import (MAX_ITER, DiscreteDomain, bp_maximize, builtin_objective,
                                   load_objective_csv, verify_bp)
from seelab.errors import ArgumentError, ShapeError
from seelab.spectral import BlockOperator, dirichlet_laplacian


def _line_domain(states, times=(0.0,)):
    return DiscreteDomain(np.array(times), np.array(states, dtype=float)[:, None], dirichlet_laplacian(1))


def test_start_at_strict_max_stops_immediately():
    dom = _line_domain([0.0, 1.0, 2.0])
    res = bp_maximize(np.array([[0.0, 1.0, 0.5]]), dom, (0, 1), eps=0.1)
    assert res.maximizer == (0, 1)
    assert res.iterations == 0
    assert res.stabilized


def test_hand_worked_two_step():
    # F_0 = f - |y - 0.5|^4 = [-0.0625, 0.9, 0.9375]; B_0 = {1, 2}; p_1 = 2;
    # F_1(1) = 0.8375 < 0.9375 so B_1 = {2}
    dom = _line_domain([0.0, 0.5, 1.0])
    f = np.array([[0.0, 0.9, 1.0]])
    res = bp_maximize(f, dom, (0, 1), eps=0.5)
    assert res.anchors == [(0, 1), (0, 2)]
    assert res.maximizer == (0, 2)
    assert res.perturbed[0, 1] == pytest.approx(0.8375)
    assert verify_bp(res, f, dom)["passed"]


def test_start_precondition_names_sup():
    dom = _line_domain([0.0, 1.0])
    with pytest.raises(ArgumentError, match="sup f = 1.0"):
        bp_maximize(np.array([[0.0, 1.0]]), dom, (0, 0), eps=0.5)


def test_bad_inputs():
    dom = _line_domain([0.0, 1.0])
    with pytest.raises(ShapeError):
        bp_maximize(np.zeros((2, 2)), dom, (0, 0), eps=1.0)
    with pytest.raises(ArgumentError):
        bp_maximize(np.array([[np.nan, 0.0]]), dom, (0, 1), eps=1.0)
    with pytest.raises(ArgumentError):
        DiscreteDomain(np.array([0.0, 0.0]), np.zeros((1, 1)), dirichlet_laplacian(1))
    with pytest.raises(ArgumentError, match="repeated"):
        DiscreteDomain(np.array([0.0]), np.zeros((2, 1)), dirichlet_laplacian(1))


def test_constant_objective_ties_resolved():
    dom = DiscreteDomain(np.linspace(0, 1, 4), np.eye(3)[:, :2], dirichlet_laplacian(2))
    f = builtin_objective("zero", dom)
    res = bp_maximize(f, dom, (1, 0), eps=1.0)
    rep = verify_bp(res, f, dom)
    assert rep["passed"], rep["violations"]
    assert res.maximizer[0] >= 1


def test_verify_detects_tampering():
    dom = _line_domain([0.0, 0.5, 1.0])
    f = np.array([[0.0, 0.9, 1.0]])
    res = bp_maximize(f, dom, (0, 1), eps=0.5)
    res.maximizer = (0, 1)
    checks = {v["check"] for v in verify_bp(res, f, dom)["violations"]}
    assert "iii" in checks


def test_csv_objective(tmp_path):
    dom = _line_domain([0.0, 1.0], times=(0.0, 0.5))
    path = tmp_path / "f.csv"
    path.write_text("t_index,x_index,value\n0,0,1.5\n0,1,2\n1,0,0\n1,1,-1\n")
    np.testing.assert_array_equal(load_objective_csv(path, dom), [[1.5, 2.0], [0.0, -1.0]])
    path.write_text("0,0,1\n")
    with pytest.raises(ArgumentError, match="no value"):
        load_objective_csv(path, dom)


def test_random_objective_seeded():
    dom = _line_domain([0.0, 1.0, 2.0])
    np.testing.assert_array_equal(builtin_objective("random", dom, 4), builtin_objective("random", dom, 4))
    with pytest.raises(ArgumentError):
        builtin_objective("nope", dom)


@st.composite
def problems(draw):
    nt = draw(st.integers(1, 6))
    ns = draw(st.integers(1, 12))
    dim = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    times = np.cumsum(rng.uniform(0.01, 0.5, size=nt))
    states = rng.normal(size=(ns, dim)) * draw(st.sampled_from([0.1, 1.0, 3.0]))
    if draw(st.booleans()):
        op = dirichlet_laplacian(dim)
    else:
        op = BlockOperator(np.zeros(dim), np.arange(1, dim + 1) * np.pi)
        states = np.column_stack([states, rng.normal(size=(ns, dim))])
    dom = DiscreteDomain(times, states, op)
    f = rng.normal(size=dom.shape) * draw(st.sampled_from([0.01, 1.0, 100.0]))
    if draw(st.booleans()):
        f = np.round(f)  # many ties
    eps = draw(st.sampled_from([1e-3, 0.5, 10.0]))
    ok = np.argwhere(f >= f.max() - eps)
    start = tuple(int(v) for v in ok[draw(st.integers(0, len(ok) - 1))])
    deltas = draw(st.lists(st.sampled_from([0.1, 1.0, 5.0]), min_size=1, max_size=4))
    return f, dom, start, eps, deltas


@given(problems())
def test_conclusions_hold_exhaustively(case):
    f, dom, start, eps, deltas = case
    res = bp_maximize(f, dom, start, eps, deltas)
    rep = verify_bp(res, f, dom)
    assert rep["passed"], rep["violations"]
    assert res.iterations <= MAX_ITER
    assert res.perturbed[res.maximizer] >= f[start]
