from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from kramers.errors import DomainError, StructureError
from kramers.objectives import (
    SmoothnessMeta,
    dissipativity_margin,
    double_well,
    quadratic,
    verify_smoothness,
)


def central_gradient(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def central_hessian(grad, x, h=1e-5):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((grad(x + e) - grad(x - e)) / (2 * h))
    return np.column_stack(cols)


OBJECTIVES = {
    "quadratic": lambda: quadratic(np.array([[2.0, 0.3], [0.3, 1.0]]), [1.0, -0.5], 0.7),
    "dw1": lambda: double_well(1, c=1.0)[0],
    "dw3": lambda: double_well(3, c=0.5, omega=[1.0, 2.0], tilt=0.1)[0],
}


@pytest.mark.parametrize("name", sorted(OBJECTIVES))
def test_derivatives_match_finite_differences(name):
    obj = OBJECTIVES[name]()
    rng = np.random.default_rng(1)
    for x in rng.uniform(-1.5, 1.5, size=(50, obj.dim)):
        g = obj.gradient(x)
        g_fd = central_gradient(obj.value, x)
        assert np.linalg.norm(g - g_fd) <= 1e-5 * max(1.0, np.linalg.norm(g))
        Hs = obj.hessian(x)
        H_fd = central_hessian(obj.gradient, x)
        assert np.linalg.norm(Hs - H_fd) <= 1e-4 * max(1.0, np.linalg.norm(Hs))


@pytest.mark.parametrize("name", sorted(OBJECTIVES))
def test_gradient_bound(name):
    obj = OBJECTIVES[name]()
    radius = min(obj.meta.working_radius, 5.0)
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, size=(1000, obj.dim))
    x *= radius / np.maximum(1.0, np.linalg.norm(x, axis=1, keepdims=True)) / math.sqrt(obj.dim)
    lhs = np.linalg.norm(obj.gradient(x), axis=1)
    rhs = obj.meta.M * np.linalg.norm(x, axis=1) + obj.meta.B
    assert np.all(lhs <= rhs + 1e-12)


def test_batched_evaluation_agrees():
    obj = OBJECTIVES["dw3"]()
    x = np.random.default_rng(3).standard_normal((4, 3))
    np.testing.assert_allclose(obj.value(x), [obj.value(p) for p in x])
    np.testing.assert_allclose(obj.gradient(x), [obj.gradient(p) for p in x])


class TestQuadratic:
    def test_identity(self):
        q = quadratic(np.eye(3))
        x = np.array([0.3, -1.0, 2.0])
        np.testing.assert_array_equal(q.gradient(x), x)

    def test_extreme_eigenvalues(self):
        q = quadratic(np.diag([0.01, 1.0]))
        assert q.meta.m == pytest.approx(0.01)
        assert q.meta.M == pytest.approx(1.0)
        assert q.meta.R == 0.0

    def test_gradient_value(self):
        q = quadratic(np.diag([2.0, 3.0]), [1.0, 0.0])
        np.testing.assert_allclose(q.gradient([1.0, 1.0]), [1.0, 3.0])

    def test_dissipativity_pair_with_linear_term(self):
        q = quadratic(np.diag([2.0, 3.0]), [1.0, 0.0])
        assert q.meta.m == pytest.approx(1.0)
        assert q.meta.b == pytest.approx(0.25)
        np.testing.assert_allclose(q.minimizer, [0.5, 0.0])

    def test_not_positive_definite(self):
        with pytest.raises(DomainError):
            quadratic(np.diag([1.0, 0.0]))


class TestDoubleWell:
    def test_one_dimensional_landscape(self):
        obj, land = double_well(1, c=1.0)
        np.testing.assert_allclose(land.a1, [-1.0])
        np.testing.assert_allclose(land.a2, [1.0])
        np.testing.assert_allclose(land.sigma, [0.0])
        assert obj.hessian(land.a1)[0, 0] == pytest.approx(2.0)
        assert obj.hessian(land.a2)[0, 0] == pytest.approx(2.0)
        assert obj.hessian(land.sigma)[0, 0] == pytest.approx(-1.0)
        assert land.deltaF == pytest.approx(0.25)
        assert land.mu_star_sigma == pytest.approx(1.0)

    def test_two_dimensional_saddle(self):
        _, land = double_well(2, c=1.0, omega=[1.0])
        np.testing.assert_allclose(land.hess_sigma, np.diag([-1.0, 1.0]))
        np.testing.assert_allclose(land.hess_a1, np.diag([2.0, 1.0]))

    def test_shallow_scaling(self):
        _, land = double_well(1, c=0.25)
        assert land.mu_star_sigma == pytest.approx(0.25)
        assert land.deltaF == pytest.approx(1 / 16)

    @pytest.mark.parametrize("tilt", [-0.2, 0.05, 0.3])
    def test_tilted_critical_points(self, tilt):
        obj, land = double_well(3, c=1.0, omega=[1.0, 1.5], tilt=tilt)
        for p in (land.a1, land.a2, land.sigma):
            assert np.linalg.norm(obj.gradient(p)) <= 1e-9
        assert np.all(np.linalg.eigvalsh(land.hess_a1) > 0)
        assert np.all(np.linalg.eigvalsh(land.hess_a2) > 0)
        assert np.sum(np.linalg.eigvalsh(land.hess_sigma) < 0) == 1
        assert land.deltaF > 0

    def test_excessive_tilt(self):
        with pytest.raises(StructureError):
            double_well(1, c=1.0, tilt=0.5)


class TestSmoothness:
    def test_quadratic_gradient_ratio(self):
        rep = verify_smoothness(quadratic(np.diag([1.0, 2.0])), 500, 3.0, seed=0)
        assert rep.gradient_ratio <= 2.0 + 1e-12
        assert rep.ok

    def test_double_well_hessian_ratio(self):
        obj, _ = double_well(1, c=1.0, working_radius=2.0)
        assert obj.meta.L == pytest.approx(12.0)
        rep = verify_smoothness(obj, 2000, 2.0, seed=1)
        # |F'''| = 6|x| peaks at the boundary of the working ball
        assert rep.hessian_ratio <= 12.0
        assert rep.hessian_ratio > 9.0
        assert rep.ok

    def test_wrong_metadata_flags(self):
        q = quadratic(np.diag([1.0, 2.0]))
        q.meta = SmoothnessMeta(m=1.0, b=0.0, M=1.0, L=0.0, A=0.0, B=0.0, C=2.0)
        assert verify_smoothness(q, 200, 2.0).gradient_violation


class TestDissipativity:
    def test_identity_margin_zero(self):
        assert dissipativity_margin(quadratic(np.eye(2)), 200, 3.0) == pytest.approx(0.0, abs=1e-12)

    def test_double_well_reference_pair(self):
        obj, _ = double_well(1, c=1.0)
        # oracle: scalar minimization of x F'(x) - 0.5 x^2 + 1
        res = minimize_scalar(lambda s: s * (s ** 3 - s) - 0.5 * s ** 2 + 1.0,
                              bounds=(-5, 5), method="bounded")
        assert res.fun == pytest.approx(0.4375, abs=1e-8)
        margin = dissipativity_margin(obj, 2000, 5.0, m=0.5, b=1.0)
        assert margin >= res.fun - 1e-9

    def test_metadata_pair_is_valid(self):
        obj, _ = double_well(2, c=1.0, omega=[1.0], tilt=0.1)
        assert dissipativity_margin(obj, 5000, 6.0) >= 0.0

    def test_wrong_pair_negative(self):
        assert dissipativity_margin(quadratic(np.eye(2)), 200, 3.0, m=2.0, b=0.0) < 0
