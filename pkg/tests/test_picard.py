import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hydrolimit.picard import (
    SAFETY, AdmissibilityError, PicardProblem, estimate_bilinear_norm, estimate_linear_norm, matrix_problem,
    picard_solve,
)


def scalar_problem(x0, l, b):
    return PicardProblem(x0, lambda x: l * x, lambda x, y: b * x * y, abs, abs(l), abs(b))


def test_trivial_problem_one_step():
    p = PicardProblem(np.array([0.3, -0.1]), lambda x: 0 * x, lambda x, y: 0 * x,
                      lambda v: float(np.linalg.norm(v)), 0.0, 0.0)
    res = picard_solve(p)
    assert np.array_equal(res.x, p.x0)
    assert res.increments[-1] == 0 and res.iterations == 2


def test_scalar_quadratic():
    res = picard_solve(scalar_problem(0.1, 0.0, 1.0), tol=1e-15)
    assert res.x == pytest.approx((1 - np.sqrt(0.6)) / 2, abs=1e-14)
    assert res.x == pytest.approx(0.112702, abs=1e-6)


@pytest.mark.parametrize("fraction", [0.9, 0.99])
def test_scalar_near_bound_stays_in_ball(fraction):
    p = scalar_problem(0.0, 0.5, 1.0)
    p.x0 = fraction * p.data_bound
    res = picard_solve(p, tol=1e-13)
    assert abs(res.x) < p.radius
    assert res.x == pytest.approx((0.5 - np.sqrt(0.25 - 4 * p.x0)) / 2, abs=1e-11)
    assert res.C0 <= 4


def test_inadmissible_data_rejected():
    with pytest.raises(AdmissibilityError):
        picard_solve(scalar_problem(0.3, 0.0, 1.0))
    with pytest.raises(AdmissibilityError):
        picard_solve(scalar_problem(0.0, 1.0, 1.0))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.8), st.floats(0.1, 5.0), st.floats(0.0, 0.95))
def test_scalar_fixed_point_inside_ball(l, b, fraction):
    p = scalar_problem(0.0, l, b)
    p.x0 = fraction * p.data_bound
    res = picard_solve(p, tol=1e-13)
    assert abs(res.x) <= p.radius
    assert abs(res.x - (p.x0 + l * res.x + b * res.x**2)) <= 1e-11


@pytest.fixture(scope="module")
def big_problem():
    rng = np.random.default_rng(0)
    n = 100
    L = rng.standard_normal((n, n))
    L *= 0.5 / np.linalg.norm(L, 2)
    T = rng.standard_normal((n, n, n)) / n
    p = matrix_problem(L, T, np.zeros(n))
    x0 = rng.standard_normal(n)
    p.x0 = 0.9 * p.data_bound * x0 / np.linalg.norm(x0)
    return p


def test_hundred_dim_problem(big_problem):
    p = big_problem
    assert p.L_norm == pytest.approx(0.5)
    res = picard_solve(p, tol=1e-13)
    assert res.norm < p.radius
    assert res.C0 <= 4
    x = res.x
    assert np.linalg.norm(x - p.x0 - p.linear(x) - p.bilinear(x, x)) <= 1e-12
    rng = np.random.default_rng(1)
    start = rng.standard_normal(len(x))
    start *= 0.9 * p.radius / np.linalg.norm(start)
    again = picard_solve(p, tol=1e-13, start=start)
    assert np.linalg.norm(again.x - x) <= 1e-10


def test_norm_estimates_bound_exact_values():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((30, 30))
    exact = np.linalg.norm(A, 2)
    est = estimate_linear_norm(lambda x: A.T @ (A @ x), np.linalg.norm, lambda: rng.standard_normal(30), iters=60)
    assert exact**2 <= est <= SAFETY * exact**2 * (1 + 1e-9)
    T = rng.standard_normal((10, 10, 10))
    b = estimate_bilinear_norm(lambda x, y: np.einsum("ijk,j,k->i", T, x, y), np.linalg.norm,
                               lambda: rng.standard_normal(10))
    for _ in range(50):
        x, y = rng.standard_normal((2, 10))
        x, y = x / np.linalg.norm(x), y / np.linalg.norm(y)
        assert np.linalg.norm(np.einsum("ijk,j,k->i", T, x, y)) <= b
