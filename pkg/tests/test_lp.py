import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from mdiqkd.lp import LPStatus, solve_lp


def test_trivial_max():
    # max x + y, x + y <= 1, x, y in [0, 1]
    res = solve_lp([1, 1], [[1, 1]], [1], upper=[1, 1], maximize=True)
    assert res.ok
    assert res.value == pytest.approx(1.0)


def test_trivial_min_with_lower_row():
    # min x subject to x >= 0.3 written as -x <= -0.3
    res = solve_lp([1.0], [[-1.0]], [-0.3])
    assert res.ok
    assert res.value == pytest.approx(0.3)
    assert res.x[0] == pytest.approx(0.3)


def test_infeasible():
    res = solve_lp([1.0], [[1.0], [-1.0]], [0.2, -0.5])
    assert res.status is LPStatus.INFEASIBLE


def test_unbounded():
    res = solve_lp([1.0, 0.0], [[-1.0, 1.0]], [1.0], maximize=True)
    assert res.status is LPStatus.UNBOUNDED


def test_upper_bound_only():
    res = solve_lp([2.0, -1.0], np.zeros((0, 2)), [], upper=[0.5, 3.0], maximize=True)
    assert res.value == pytest.approx(1.0)


def vertex_oracle(c, A, b, upper, maximize):
    """Best objective over every vertex of {A x <= b, 0 <= x <= upper}, 3 variables."""
    n = len(c)
    rows = [(A[i], b[i]) for i in range(len(b))]
    for j in range(n):
        e = np.zeros(n)
        e[j] = -1.0
        rows.append((e, 0.0))
        e = np.zeros(n)
        e[j] = 1.0
        rows.append((e, upper[j]))
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        M = np.array([rows[k][0] for k in combo])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.array([rows[k][1] for k in combo]))
        if all(r @ x <= rb + 1e-9 for r, rb in rows):
            v = float(np.dot(c, x))
            if best is None or (v > best if maximize else v < best):
                best = v
    return best


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), maximize=st.booleans())
def test_matches_vertex_enumeration(seed, maximize):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    A = rng.normal(size=(4, 3))
    b = rng.uniform(0.1, 2.0, 4)  # x = 0 feasible
    upper = rng.uniform(0.5, 2.0, 3)
    res = solve_lp(c, A, b, upper=upper, maximize=maximize)
    assert res.ok
    assert res.value == pytest.approx(vertex_oracle(c, A, b, upper, maximize), abs=1e-8)
    assert np.all(A @ res.x <= b + 1e-8)
    assert np.all(res.x >= -1e-12) and np.all(res.x <= upper + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_matches_highs(seed):
    rng = np.random.default_rng(seed)
    n, m = 12, 9
    x0 = rng.uniform(0, 1, n)
    A = rng.normal(size=(m, n))
    b = A @ x0 + rng.uniform(0, 0.5, m)  # x0 feasible
    c = rng.normal(size=n)
    ref = linprog(c, A_ub=A, b_ub=b, bounds=[(0, 1)] * n, method="highs")
    res = solve_lp(c, A, b, upper=np.ones(n))
    assert ref.status == 0 and res.ok
    assert res.value == pytest.approx(ref.fun, abs=1e-8)


def test_tiny_rhs_scale_matches_highs():
    # decoy-like scaling: rhs of order 1e-8
    rng = np.random.default_rng(3)
    n = 10
    x0 = rng.uniform(0, 1, n)
    A = rng.uniform(0, 1, (6, n)) * 1e-8
    b = A @ x0
    A = np.vstack([A, -A])
    b = np.concatenate([b * 1.01, -b * 0.99])
    c = np.zeros(n)
    c[1] = 1.0
    ref = linprog(c, A_ub=A, b_ub=b, bounds=[(0, 1)] * n, method="highs")
    res = solve_lp(c, A, b, upper=np.ones(n))
    assert res.ok
    assert res.value == pytest.approx(ref.fun, abs=1e-7)


def test_deterministic():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(8, 10))
    b = np.abs(rng.normal(size=8))
    c = rng.normal(size=10)
    r1 = solve_lp(c, A, b, upper=np.ones(10))
    r2 = solve_lp(c, A, b, upper=np.ones(10))
    assert r1.value == r2.value
    assert np.array_equal(r1.x, r2.x) and r1.pivots == r2.pivots
