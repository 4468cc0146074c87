import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isi_mismatch.optimize import (BOUNDARY, CONVERGED, INFEASIBLE, fd_gradient, maximize_outer,
                                   minimize_scalar_convex, minimize_vector_convex)


class TestScalar:
    def test_interior(self):
        res = minimize_scalar_convex(lambda w: (w - 2) ** 2)
        assert res.x == pytest.approx(2, abs=1e-7)
        assert res.value == pytest.approx(0, abs=1e-12)
        assert res.status == CONVERGED

    def test_boundary(self):
        res = minimize_scalar_convex(lambda w: math.exp(w) - w)
        assert res.x == pytest.approx(0, abs=1e-7)
        assert res.value == pytest.approx(1)
        assert res.status == BOUNDARY

    def test_reciprocal(self):
        res = minimize_scalar_convex(lambda w: w + 1 / w if w > 0 else math.inf)
        assert res.x == pytest.approx(1, abs=1e-6)
        assert res.value == pytest.approx(2, abs=1e-12)

    @given(st.floats(0.1, 50), st.floats(-5, 30))
    @settings(max_examples=60, deadline=None)
    def test_quadratics(self, a, c):
        res = minimize_scalar_convex(lambda w: a * (w - c) ** 2, tol=1e-10)
        assert res.x == pytest.approx(max(c, 0.0), abs=1e-8)

    def test_everywhere_infinite(self):
        res = minimize_scalar_convex(lambda w: math.inf)
        assert res.status == INFEASIBLE and not res.ok


class TestVector:
    def test_interior(self):
        c = np.array([0.3, 1.2, 2.0])
        res = minimize_vector_convex(lambda x: float(np.sum((x - c) ** 2)), np.ones(3), lower=np.zeros(3))
        np.testing.assert_allclose(res.x, c, atol=1e-7)
        assert res.status == CONVERGED

    def test_cone_boundary(self):
        A = np.array([[1.0, -1.0], [0.0, 1.0]])
        res = minimize_vector_convex(lambda x: float(x @ x), [2.0, 1.0], linear_constraints=(A, np.zeros(2)))
        np.testing.assert_allclose(res.x, 0.0, atol=1e-4)
        assert res.value < 1e-8
        assert res.status == BOUNDARY

    def test_infeasible_start(self):
        res = minimize_vector_convex(lambda x: math.inf, [1.0])
        assert res.status == INFEASIBLE

    @given(st.integers(0, 10_000), st.integers(1, 6))
    @settings(max_examples=30, deadline=None)
    def test_random_quadratic_beats_feasible_points(self, seed, d):
        rng = np.random.default_rng(seed)
        B = rng.normal(size=(d, d))
        Q = B @ B.T + 0.1 * np.eye(d)
        c = rng.normal(size=d)

        def f(x):
            return float(0.5 * x @ Q @ x - c @ x)

        res = minimize_vector_convex(f, np.ones(d), lower=np.zeros(d))
        for _ in range(20):
            z = np.abs(rng.normal(size=d)) * 2
            assert res.value <= f(z) + 1e-8
        assert res.value <= f(np.zeros(d)) + 1e-8

    def test_analytic_derivatives_used(self):
        calls = {"g": 0}

        def grad(x):
            calls["g"] += 1
            return 2 * (x - 1)

        res = minimize_vector_convex(lambda x: float(np.sum((x - 1) ** 2)), np.zeros(2), grad=grad,
                                     hess=lambda x: 2 * np.eye(2))
        assert calls["g"] > 0 and res.x == pytest.approx([1, 1])


class TestOuter:
    def test_parabola(self):
        res = maximize_outer(lambda x: -(x[0] - 0.3) ** 2, [(-1, 1)])
        assert res.x[0] == pytest.approx(0.3, abs=1e-6)

    def test_global_of_two_peaks(self):
        def f(x):
            return math.exp(-((x[0] + 0.6) / 0.05) ** 2) + 1.2 * math.exp(-((x[0] - 0.5) / 0.05) ** 2)

        res = maximize_outer(f, [(-1, 1)], resolution=81)
        assert res.x[0] == pytest.approx(0.5, abs=1e-4)

    def test_tie_break_lowest_index(self):
        res = maximize_outer(lambda x: 1.0, [(-1, 1), (-1, 1)], resolution=5, refine=False)
        np.testing.assert_allclose(res.x, [-1, -1])

    def test_deterministic(self):
        def f(x):
            return -float(np.sum((x - 0.1) ** 2)) + 0.1 * math.sin(7 * x[0])

        a = maximize_outer(f, [(-1, 1), (-1, 1)], resolution=11)
        b = maximize_outer(f, [(-1, 1), (-1, 1)], resolution=11)
        assert np.array_equal(a.x, b.x) and a.value == b.value

    def test_infeasible_points_skipped(self):
        res = maximize_outer(lambda x: -x[0], [(-1, 1)], feasible=lambda x: x[0] > 0.2)
        assert res.x[0] == pytest.approx(0.2, abs=1e-3)


def test_fd_gradient():
    g = fd_gradient(lambda x: float(x[0] ** 2 + 3 * x[1]), np.array([1.5, -2.0]))
    np.testing.assert_allclose(g, [3.0, 3.0], rtol=1e-6)
