import numpy as np
import pytest

from relucells._simplex import lp_min_l1, max_margin, simplex
from relucells.errors import InfeasibleError


def test_simplex_basic_lp():
    # min -x1 - 2 x2 s.t. x1 + x2 + s = 4, x2 + t = 3
    c = np.array([-1.0, -2.0, 0.0, 0.0])
    A = np.array([[1.0, 1.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]])
    b = np.array([4.0, 3.0])
    res = simplex(c, A, b)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-7.0)
    assert res.x[:2] == pytest.approx([1.0, 3.0])


def test_simplex_infeasible():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    res = simplex(np.zeros(2), A, b)
    assert res.status == "infeasible"


def test_simplex_unbounded():
    # min -x s.t. x - s = 0 (x free to grow)
    res = simplex(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]))
    assert res.status == "unbounded"


def test_simplex_negative_rhs():
    # rows with negative b are flipped internally
    res = simplex(
        np.array([1.0, 1.0]), np.array([[-1.0, 0.0], [0.0, 1.0]]),
        np.array([-2.0, 1.0]),
    )
    assert res.status == "optimal"
    assert res.x == pytest.approx([2.0, 1.0])


def test_lp_min_l1_identity():
    z, obj = lp_min_l1(np.eye(2), np.array([2.0, -3.0]))
    assert z == pytest.approx([2.0, -3.0])
    assert obj == pytest.approx(5.0)


def test_lp_min_l1_prefers_sparse_column():
    # y reachable via one column of cost 1 or two of cost 2
    A = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    y = np.array([1.0, 1.0])
    z, obj = lp_min_l1(A, y)
    assert obj == pytest.approx(1.0)
    assert z == pytest.approx([1.0, 0.0, 0.0])


def test_lp_min_l1_infeasible():
    with pytest.raises(InfeasibleError):
        lp_min_l1(np.array([[1.0], [1.0]]), np.array([1.0, 2.0]))


def test_lp_min_l1_basic_support_bound():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, s = 3, 12
        A = np.abs(rng.normal(size=(n, s)))
        y = A @ np.abs(rng.normal(size=s))
        z, _ = lp_min_l1(A, y)
        assert np.sum(np.abs(z) > 1e-9) <= n
        assert A @ z == pytest.approx(y, abs=1e-8)


def test_max_margin_single_row():
    t, theta = max_margin(np.array([[1.0, 1.0]]), np.array([1.0]))
    assert t == pytest.approx(2.0)
    assert theta == pytest.approx([1.0, 1.0])


def test_max_margin_infeasible_signs():
    # opposite signs on the same hyperplane leave only t = 0
    rows = np.array([[1.0, 0.0], [1.0, 0.0]])
    t, _ = max_margin(rows, np.array([1.0, -1.0]))
    assert t == pytest.approx(0.0, abs=1e-9)


def test_max_margin_box_bound():
    t, theta = max_margin(np.array([[1.0, 0.0]]), np.array([1.0]), box=0.5)
    assert t == pytest.approx(0.5)
    assert np.max(np.abs(theta)) <= 0.5 + 1e-12
