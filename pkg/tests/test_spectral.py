"""Basis bookkeeping, quadrature, and projection round-trips.

The key oracle is the parabola x(1-x), whose sine coefficients are
known in closed form: 4*sqrt(2)/(n^3 pi^3) for odd n, zero for even n.
Those literals are frozen below and everything spectral is checked
against them.
"""

import numpy as np
import pytest

from bridgegp import (
    DomainError,
    OrderMismatchError,
    ResourceLimitError,
    SpectralField,
    basis_eval,
    basis_field,
    basis_matrix,
    default_rule,
    dirichlet_eigenvalues,
    enumerate_indices,
    evaluate,
    gauss_legendre_rule,
    index_array,
    l2_inner,
    l2_norm,
    project,
    zero_field,
)
from bridgegp.spectral import validate_points, values_on_rule

# 4*sqrt(2)/(n^3 pi^3), computed once with mpmath-free numpy and frozen.
PARABOLA_COEFFS = {
    1: 0.18244222961109438,
    3: 0.0067571196152257183,
    5: 0.0014595378368887552,
    7: 0.00053190154405566878,
}


def parabola(x):
    return x * (1.0 - x)


class TestEnumeration:
    def test_lexicographic_example(self):
        assert enumerate_indices(2, 2) == [(1, 1), (1, 2), (2, 1), (2, 2)]

    def test_index_array_matches_list(self):
        for dim, order in [(1, 7), (2, 4), (3, 3)]:
            arr = index_array(dim, order)
            assert arr.shape == (order**dim, dim)
            assert [tuple(row) for row in arr] == enumerate_indices(dim, order)

    def test_eigenvalues_canonical_order(self):
        lam = dirichlet_eigenvalues(2, 2)
        expect = np.pi**2 * np.array([2.0, 5.0, 5.0, 8.0])
        np.testing.assert_allclose(lam, expect, rtol=1e-15)

    def test_caps(self):
        with pytest.raises(ResourceLimitError):
            enumerate_indices(4, 2)
        with pytest.raises(ResourceLimitError):
            enumerate_indices(2, 65)
        with pytest.raises(ResourceLimitError):
            enumerate_indices(3, 33)
        with pytest.raises(ValueError):
            enumerate_indices(1, 0)
        # the largest allowed shapes construct fine
        index_array(2, 64)
        index_array(3, 32)


class TestBasis:
    def test_single_point_value(self):
        # sqrt(2) * sin(2 pi * 3/4) = -sqrt(2)
        assert basis_eval([2], 0.75) == pytest.approx(-np.sqrt(2), abs=1e-15)

    def test_matrix_agrees_with_eval(self, rng):
        pts = rng.uniform(size=(40, 2))
        mat = basis_matrix(2, 5, pts)
        for j, alpha in enumerate(enumerate_indices(2, 5)):
            # product association differs between the two paths
            np.testing.assert_allclose(
                mat[:, j], basis_eval(alpha, pts), rtol=1e-12, atol=1e-15
            )

    def test_boundary_values_exactly_zero(self):
        pts = np.array([[0.0, 0.3], [1.0, 0.7], [0.25, 0.0], [0.5, 1.0]])
        assert np.all(basis_matrix(2, 6, pts) == 0.0)
        assert basis_eval([3], 1.0) == 0.0
        assert basis_eval([3], 0.0) == 0.0

    def test_orthonormality(self):
        # Gram of the first 8 basis functions under the default rule.
        order = 8
        rule = default_rule(1, order)
        mat = basis_matrix(1, order, rule.nodes)
        gram = (mat * rule.weights[:, None]).T @ mat
        np.testing.assert_allclose(gram, np.eye(order), atol=1e-10)

    def test_orthonormality_2d(self):
        order = 4
        rule = default_rule(2, order)
        mat = basis_matrix(2, order, rule.nodes)
        gram = (mat * rule.weights[:, None]).T @ mat
        np.testing.assert_allclose(gram, np.eye(order**2), atol=1e-10)

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            basis_eval([1], 1.2)
        with pytest.raises(DomainError):
            validate_points([[0.5, -0.1]], 2)
        with pytest.raises(DomainError):
            validate_points([np.nan], 1)
        with pytest.raises(ValueError):
            validate_points(np.zeros((3, 2)), 1)


class TestField:
    def test_shape_enforced(self):
        with pytest.raises(OrderMismatchError):
            SpectralField(2, 3, np.zeros(8))
        with pytest.raises(ValueError):
            SpectralField(1, 2, [1.0, np.inf])

    def test_coeffs_read_only(self):
        u = SpectralField(1, 3, [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            u.coeffs[0] = 9.0

    def test_arithmetic(self):
        u = SpectralField(1, 2, [1.0, 2.0])
        v = SpectralField(1, 2, [10.0, -1.0])
        np.testing.assert_array_equal((u + v).coeffs, [11.0, 1.0])
        np.testing.assert_array_equal((u - v).coeffs, [-9.0, 3.0])
        np.testing.assert_array_equal((3.0 * u).coeffs, [3.0, 6.0])
        np.testing.assert_array_equal((u * 3.0).coeffs, [3.0, 6.0])
        with pytest.raises(OrderMismatchError):
            u + SpectralField(1, 3, [0.0, 0.0, 0.0])

    def test_basis_field_placement(self):
        u = basis_field(2, 3, (2, 3))
        tensor = u.as_tensor()
        assert tensor[1, 2] == 1.0
        assert np.sum(np.abs(u.coeffs)) == 1.0
        with pytest.raises(ValueError):
            basis_field(2, 3, (0, 1))
        with pytest.raises(ValueError):
            basis_field(2, 3, (1, 4))

    def test_callable_matches_evaluate(self, rng):
        u = SpectralField(1, 5, rng.normal(size=5))
        x = rng.uniform(size=9)
        np.testing.assert_array_equal(u(x), evaluate(u, x))
        assert isinstance(u(0.5), float)


class TestQuadrature:
    def test_weights_sum_to_one(self):
        for dim in (1, 2, 3):
            rule = gauss_legendre_rule(dim, 3)
            assert rule.weights.sum() == pytest.approx(1.0, abs=1e-13)
            assert np.all(rule.weights > 0.0)

    def test_integrates_polynomial_exactly(self):
        rule = gauss_legendre_rule(1, 2)
        # integral of x^4 over [0, 1] is 1/5
        val = rule.integrate(rule.nodes[:, 0] ** 4)
        assert val == pytest.approx(0.2, abs=1e-15)

    def test_default_rule_cached(self):
        assert default_rule(1, 6) is default_rule(1, 6)


class TestProjection:
    def test_parabola_coefficients_match_closed_form(self):
        u = project(parabola, 1, 8)
        for n in range(1, 9):
            expect = PARABOLA_COEFFS.get(n, 0.0)
            assert u.coeffs[n - 1] == pytest.approx(expect, abs=1e-14)

    def test_round_trip_band_limited(self, rng):
        # A field that lives inside the truncation projects back to itself.
        u = SpectralField(1, 6, rng.normal(size=6))
        v = project(u, 1, 6)
        np.testing.assert_allclose(v.coeffs, u.coeffs, atol=1e-12)

    def test_round_trip_2d(self, rng):
        u = SpectralField(2, 4, rng.normal(size=16))
        v = project(u, 2, 4)
        np.testing.assert_allclose(v.coeffs, u.coeffs, atol=1e-12)

    def test_separable_product_2d(self):
        # f(x, y) = x(1-x) y(1-y) has coefficients c_m * c_n.
        u = project(lambda p: parabola(p[:, 0]) * parabola(p[:, 1]), 2, 6)
        tensor = u.as_tensor()
        c1 = np.array([PARABOLA_COEFFS.get(n, 0.0) for n in range(1, 7)])
        np.testing.assert_allclose(tensor, np.outer(c1, c1), atol=1e-14)

    def test_parseval(self):
        # integral of x^2 (1-x)^2 over [0, 1] is 1/30; the S = 512 series
        # tail is ~1e-16, far below the tolerance.
        u = project(parabola, 1, 512)
        assert l2_norm(u) ** 2 == pytest.approx(1.0 / 30.0, abs=1e-13)

    def test_evaluate_matches_function(self):
        u = project(parabola, 1, 512)
        x = np.array([0.1, 0.37, 0.5, 0.93])
        np.testing.assert_allclose(evaluate(u, x), parabola(x), atol=1e-8)

    def test_values_on_rule_matches_pointwise(self, rng):
        u = SpectralField(2, 5, rng.normal(size=25))
        rule = default_rule(2, 5)
        np.testing.assert_allclose(
            values_on_rule(u, rule), evaluate(u, rule.nodes), atol=1e-12
        )
        with pytest.raises(OrderMismatchError):
            values_on_rule(u, default_rule(1, 5))

    def test_inner_product_via_parseval(self):
        u = SpectralField(1, 3, [1.0, 0.0, 2.0])
        v = SpectralField(1, 3, [0.5, 1.0, -1.0])
        assert l2_inner(u, v) == -1.5
        assert l2_inner(zero_field(1, 3), v) == 0.0
