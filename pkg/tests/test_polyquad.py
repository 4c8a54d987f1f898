"""Tableau, basis, and quadrature primitives against closed-form oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgtime.polyquad import (
    gauss_rule,
    lagrange_basis,
    legendre_basis,
    radau_tableau,
)

SQRT6 = np.sqrt(6.0)


class TestRadauTableau:
    def test_single_stage_is_backward_euler(self):
        t = radau_tableau(1)
        np.testing.assert_array_equal(t.c, [1.0])
        np.testing.assert_array_equal(t.a, [[1.0]])
        np.testing.assert_array_equal(t.b, [1.0])

    def test_two_stages_closed_form(self):
        t = radau_tableau(2)
        np.testing.assert_allclose(t.c, [1 / 3, 1.0], atol=1e-14)
        np.testing.assert_allclose(t.a, [[5 / 12, -1 / 12], [3 / 4, 1 / 4]], atol=1e-14)
        np.testing.assert_allclose(t.b, [3 / 4, 1 / 4], atol=1e-14)

    def test_three_stage_nodes_closed_form(self):
        t = radau_tableau(3)
        np.testing.assert_allclose(
            t.c, [(4 - SQRT6) / 10, (4 + SQRT6) / 10, 1.0], atol=1e-14)

    @pytest.mark.parametrize("q", range(1, 9))
    def test_quadrature_exactness(self, q):
        t = radau_tableau(q)
        for m in range(2 * q - 1):
            assert t.b @ t.c**m == pytest.approx(1 / (m + 1), abs=1e-12)

    @pytest.mark.parametrize("q", range(1, 9))
    def test_row_sums_and_weights(self, q):
        t = radau_tableau(q)
        np.testing.assert_allclose(t.a.sum(axis=1), t.c, atol=1e-13)
        assert t.b.sum() == pytest.approx(1.0, abs=1e-13)
        np.testing.assert_allclose(t.lagrange_integrals, t.b, atol=0)

    @pytest.mark.parametrize("q", range(1, 9))
    def test_nodes_ascending_ending_at_one(self, q):
        t = radau_tableau(q)
        assert t.c[-1] == 1.0
        assert t.c[0] > 0
        assert np.all(np.diff(t.c) > 0)

    @pytest.mark.parametrize("q", [0, 9, -3])
    def test_unsupported_stage_count(self, q):
        with pytest.raises(ValueError):
            radau_tableau(q)

    @pytest.mark.parametrize("q", [4, 5, 6, 7, 8])
    def test_nodes_zero_right_radau_polynomial(self, q):
        # interior nodes are simple roots of P_{q-1} - P_q on [-1, 1]
        from numpy.polynomial import legendre as npleg

        t = radau_tableau(q)
        g = np.zeros(q + 1)
        g[q - 1], g[q] = 1.0, -1.0
        vals = npleg.legval(2.0 * t.c[:-1] - 1.0, g)
        assert np.max(np.abs(vals)) <= 1e-13

    def test_tableaus_are_immutable(self):
        t = radau_tableau(2)
        with pytest.raises(ValueError):
            t.c[0] = 0.5


class TestLagrangeBasis:
    def test_cardinal_property(self):
        b = lagrange_basis([1 / 3, 1.0])
        E = b.eval_matrix([1 / 3, 1.0])
        np.testing.assert_allclose(E, np.eye(2), atol=1e-15)

    def test_integral_of_first_basis_function(self):
        # nodes (1/3, 1): l_1(tau) = (3/2)(1 - tau), integral 3/4
        b = lagrange_basis([1 / 3, 1.0])
        assert b.integrals()[0] == pytest.approx(0.75, abs=1e-14)

    def test_partition_of_unity_three_nodes(self):
        b = lagrange_basis([0.0, 1 / 3, 1.0])
        assert b.eval_matrix([0.7]).sum() == pytest.approx(1.0, abs=1e-13)

    def test_duplicate_nodes_rejected(self):
        with pytest.raises(ValueError):
            lagrange_basis([0.2, 0.2, 1.0])

    @pytest.mark.parametrize("q", range(1, 9))
    def test_derivative_rows_sum_to_zero_radau_nodes(self, q):
        b = radau_tableau(q).stage_basis
        taus = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(b.deriv_matrix(taus).sum(axis=1), 0.0, atol=1e-11)

    @given(st.sets(st.integers(min_value=0, max_value=50), min_size=2, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_derivative_rows_sum_to_zero_random_nodes(self, raw_nodes):
        # clustered nodes inflate the entries; cancellation is relative
        nodes = np.array(sorted(raw_nodes)) / 50.0
        b = lagrange_basis(nodes)
        taus = np.linspace(0.0, 1.0, 11)
        D = b.deriv_matrix(taus)
        scale = max(np.abs(D).max(), 1.0)
        np.testing.assert_allclose(D.sum(axis=1), 0.0, atol=1e-11 * scale)

    @given(st.sets(st.integers(min_value=0, max_value=50), min_size=2, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_partition_of_unity_random_nodes(self, raw_nodes):
        nodes = np.array(sorted(raw_nodes)) / 50.0
        b = lagrange_basis(nodes)
        taus = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(b.eval_matrix(taus).sum(axis=1), 1.0, atol=1e-12)

    def test_derivative_matches_monomial_oracle(self):
        # interpolate tau^2 on 3 nodes; derivative must be 2 tau
        nodes = np.array([0.1, 0.5, 0.9])
        b = lagrange_basis(nodes)
        taus = np.linspace(0.0, 1.0, 7)
        vals = b.deriv_matrix(taus) @ nodes**2
        np.testing.assert_allclose(vals, 2 * taus, atol=1e-12)


class TestLegendreBasis:
    def test_value_one_at_right_endpoint(self):
        leg = legendre_basis(5)
        np.testing.assert_allclose(leg.eval_matrix([1.0])[0], 1.0, atol=1e-14)

    def test_orthogonality_and_norms(self):
        leg = legendre_basis(4)
        g = gauss_rule(12)
        E = leg.eval_matrix(g.nodes)
        gram = (E * g.weights[:, None]).T @ E
        np.testing.assert_allclose(gram, np.diag(leg.sq_norms), atol=1e-14)

    def test_derivative_against_finite_differences(self):
        leg = legendre_basis(4)
        taus = np.linspace(0.05, 0.95, 7)
        h = 1e-6
        fd = (leg.eval_matrix(taus + h) - leg.eval_matrix(taus - h)) / (2 * h)
        np.testing.assert_allclose(leg.deriv_matrix(taus), fd, atol=1e-7)


class TestGaussRule:
    def test_midpoint_rule(self):
        g = gauss_rule(1)
        np.testing.assert_allclose(g.nodes, [0.5], atol=0)
        np.testing.assert_allclose(g.weights, [1.0], atol=0)

    def test_two_point_nodes(self):
        g = gauss_rule(2)
        expect = [0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)]
        np.testing.assert_allclose(g.nodes, expect, atol=1e-15)

    def test_cubic_exactness_with_two_points(self):
        g = gauss_rule(2)
        assert g.weights @ g.nodes**3 == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("n", [0, 65])
    def test_rule_size_bounds(self, n):
        with pytest.raises(ValueError):
            gauss_rule(n)

    def test_mapped_interval(self):
        g = gauss_rule(4)
        pts, wts = g.mapped(0.25, 0.75)
        assert wts.sum() == pytest.approx(0.5, abs=1e-15)
        assert wts @ pts**2 == pytest.approx((0.75**3 - 0.25**3) / 3, abs=1e-15)

    def test_integrate_sampled_values(self):
        g = gauss_rule(6)
        vals = np.stack([g.nodes**4, np.ones_like(g.nodes)], axis=1)
        np.testing.assert_allclose(g.integrate(vals), [0.2, 1.0], atol=1e-15)
