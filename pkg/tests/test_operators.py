"""Operator models: stencils, shifted and block solves, time dependence."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgtime.operators import (
    ModelRejectedError,
    assemble_block,
    laplacian_1d,
    matrix_from_text,
    matrix_to_text,
    nonautonomous_model,
    nonnormal_model,
)


class TestLaplacian1D:
    def test_single_point_stencil(self):
        op = laplacian_1d(1, 1.0)
        assert op.matrix[0, 0] == pytest.approx(8.0)  # 2 / h^2 with h = 1/2

    def test_three_point_eigenvalues(self):
        op = laplacian_1d(3, 1.0)
        h = 0.25
        expect = np.sort(4 * np.sin(np.arange(1, 4) * np.pi / 8) ** 2 / h**2)
        got = np.sort(np.linalg.eigvalsh(op.matrix))
        np.testing.assert_allclose(got, expect, rtol=1e-12)

    def test_symmetry_and_positivity(self):
        op = laplacian_1d(10, 0.3)
        assert op.symmetric
        assert np.min(np.linalg.eigvalsh(op.matrix)) > 0

    def test_nonpositive_diffusion_rejected(self):
        with pytest.raises(ValueError):
            laplacian_1d(5, 0.0)


class TestShiftedSolve:
    def test_identity_shift(self):
        op = laplacian_1d(6)
        r = np.arange(6.0)
        np.testing.assert_allclose(op.solve_shifted(1.0, 0.0, r), r, atol=1e-14)

    @given(st.integers(min_value=1, max_value=8), st.floats(0.01, 10.0))
    @settings(max_examples=25, deadline=None)
    def test_consistency_with_apply(self, d, beta):
        rng = np.random.default_rng(d)
        op = laplacian_1d(d)
        r = rng.standard_normal(d)
        x = op.solve_shifted(1.0, beta, r)
        resid = x + beta * op.apply(x) - r
        assert np.max(np.abs(resid)) <= 1e-10 * max(np.max(np.abs(r)), 1.0)


class TestNonnormalModel:
    def test_zero_skew_is_symmetric(self):
        op = nonnormal_model(4, 0.0)
        np.testing.assert_array_equal(op.matrix, op.matrix.T)

    def test_two_by_two_eigenvalue_oracle(self):
        op = nonnormal_model(2, 1.0)
        # [[2, 0], [-1, 2]]: direct quadratic formula gives a double root at 2
        eigs = np.linalg.eigvals(op.matrix)
        np.testing.assert_allclose(sorted(eigs.real), [2.0, 2.0], atol=1e-12)
        assert np.all(eigs.real > 0)

    def test_transpose_differs_for_nonzero_skew(self):
        op = nonnormal_model(4, 0.7)
        assert not np.array_equal(op.matrix, op.matrix.T)
        assert not op.symmetric

    def test_spectrum_validation_rejects(self):
        # skew = -3.5 drives an eigenvalue of the 2x2 block negative:
        # eigenvalues 2 +- sqrt(1 - skew) = 2 +- sqrt(4.5)
        with pytest.raises(ModelRejectedError):
            nonnormal_model(2, -3.5)


class TestBlockSolve:
    @given(st.integers(min_value=1, max_value=3), st.floats(0.01, 1.0),
           st.integers(min_value=0, max_value=1000))
    @settings(max_examples=25, deadline=None)
    def test_block_residual(self, q, k, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 6))
        op = laplacian_1d(d)
        M = rng.standard_normal((q, q)) + 3 * np.eye(q)
        S = k * (rng.standard_normal((q, q)) * 0.1 + np.eye(q))
        rhs = rng.standard_normal((q, d))
        X = op.block_solver(M, S).solve(rhs)
        resid = assemble_block(M, S, op.matrix) @ X.reshape(q * d) - rhs.reshape(q * d)
        scale = max(np.max(np.abs(rhs)), 1.0)
        assert np.max(np.abs(resid)) <= 1e-10 * scale

    def test_solver_cache_reuses_factorization(self):
        op = laplacian_1d(4)
        M, S = np.eye(2), 0.1 * np.eye(2)
        assert op.block_solver(M, S) is op.block_solver(M, S)


class TestMatrixFile:
    def test_roundtrip(self, tmp_path):
        op = nonnormal_model(3, 0.4)
        path = tmp_path / "A.txt"
        matrix_to_text(op, path)
        op2 = matrix_from_text(path)
        np.testing.assert_array_equal(op.matrix, op2.matrix)

    def test_dimension_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3\n1 0 0\n0 1 0\n")
        with pytest.raises(ValueError):
            matrix_from_text(path)


class TestTimeDependentModel:
    def test_constant_modulation_reduces_to_base(self):
        base = laplacian_1d(5)
        model = nonautonomous_model(base, lambda t: 1.0, lipschitz_bound=0.0)
        x = np.arange(5.0)
        for t in (0.0, 0.3, 1.0):
            np.testing.assert_array_equal(model.apply_at(t, x), base.apply(x))

    def test_linear_modulation_lipschitz_constant(self):
        # a(t) = 1 + t/2, no drift: ||(A(t)-A(s))v|| = |t-s|/2 ||A(0)v||,
        # so the declared bound 1/2 is exact and must pass the soft check
        base = laplacian_1d(4)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            model = nonautonomous_model(base, lambda t: 1 + 0.5 * t, lipschitz_bound=0.5)
        v = np.array([1.0, -2.0, 0.5, 3.0])
        lhs = np.linalg.norm((model.matrix_at(0.8) - model.matrix_at(0.2)) @ v)
        rhs = 0.5 * 0.6 * np.linalg.norm(base.matrix @ v)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_understated_lipschitz_bound_warns(self):
        base = laplacian_1d(4)
        with pytest.warns(UserWarning):
            nonautonomous_model(base, lambda t: 1 + 0.5 * t, lipschitz_bound=0.01)

    def test_equivalence_bound_from_modulation_extremes(self):
        base = laplacian_1d(3)
        model = nonautonomous_model(base, lambda t: 1 + 0.5 * t,
                                    lipschitz_bound=0.5, horizon=1.0)
        assert model.equivalence_bound == pytest.approx(1.5, rel=1e-6)

    def test_nonpositive_modulation_rejected(self):
        base = laplacian_1d(3)
        with pytest.raises(ValueError):
            nonautonomous_model(base, lambda t: 1.0 - 2.0 * t, lipschitz_bound=2.0)

    def test_apply_at_many_matches_pointwise(self):
        base = laplacian_1d(4)
        model = nonautonomous_model(base, lambda t: 1 + 0.5 * t, lipschitz_bound=0.5)
        ts = np.array([0.1, 0.4, 0.9])
        X = np.random.default_rng(0).standard_normal((3, 4))
        batch = model.apply_at_many(ts, X)
        for i, t in enumerate(ts):
            np.testing.assert_allclose(batch[i], model.apply_at(t, X[i]), atol=1e-13)

    def test_frozen_snapshot(self):
        base = laplacian_1d(3)
        model = nonautonomous_model(base, lambda t: 1 + 0.5 * t, lipschitz_bound=0.5)
        np.testing.assert_allclose(model.frozen(1.0).matrix, 1.5 * base.matrix, atol=1e-14)
