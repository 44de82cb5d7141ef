import math

import numpy as np
import pytest
from scipy.linalg import expm

from app.core.exceptions import (
    DimensionMismatchError,
    DomainError,
    NotSymmetricError,
    PotentialOverflowError,
)
from app.core.linalg import (
    dilation,
    log_trace_cosh,
    matrix_exp,
    operator_norm,
    psd_leq,
    psd_sqrt,
    rank_one_exp,
    sym_eig,
    sym_eigvals,
    sym_matrix,
    taylor_exp,
    trace_cosh,
)
from app.core.parallel import argmin_smallest_index, map_chunks


class TestSymMatrix:
    def test_rejects_asymmetric_input(self):
        with pytest.raises(NotSymmetricError):
            sym_matrix([[1.0, 2.0], [2.5, 1.0]])

    def test_symmetrize_averages(self):
        a = sym_matrix([[1.0, 2.0], [4.0, 1.0]], symmetrize=True)
        assert a[0, 1] == a[1, 0] == 3.0

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatchError):
            sym_matrix(np.zeros((2, 3)))

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            sym_matrix([[np.nan]])

    def test_result_is_read_only(self):
        a = sym_matrix(np.eye(2))
        with pytest.raises(ValueError):
            a[0, 0] = 2.0


class TestSymEig:
    def test_diagonal_input(self):
        d = sym_eig(sym_matrix(np.diag([3.0, 1.0, 2.0])))
        np.testing.assert_allclose(d.eigenvalues, [3.0, 2.0, 1.0])
        np.testing.assert_allclose(np.abs(d.eigenvectors), np.eye(3)[:, [0, 2, 1]], atol=1e-14)

    def test_swap_matrix(self):
        np.testing.assert_allclose(sym_eigvals(sym_matrix([[0.0, 1.0], [1.0, 0.0]])), [1.0, -1.0])

    def test_random_reconstruction(self, random_symmetric):
        a = sym_matrix(random_symmetric(8))
        d = sym_eig(a)
        assert np.max(np.abs(d.reconstruct() - a)) <= 1e-10
        assert np.max(np.abs(d.eigenvectors.T @ d.eigenvectors - np.eye(8))) <= 1e-10
        assert np.all(np.diff(d.eigenvalues) <= 0)


class TestMatrixExp:
    def test_zero(self):
        np.testing.assert_allclose(matrix_exp(sym_matrix(np.zeros((3, 3)))), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(
            matrix_exp(sym_matrix(np.diag([0.5, -1.0]))), np.diag(np.exp([0.5, -1.0]))
        )

    def test_rank_one_closed_forms(self):
        e1 = np.array([1.0, 0.0, 0.0])
        plus = np.eye(3) + (math.e - 1) * np.outer(e1, e1)
        minus = np.eye(3) - (1 - math.exp(-1)) * np.outer(e1, e1)
        np.testing.assert_allclose(rank_one_exp(e1, 1), plus, atol=1e-15)
        np.testing.assert_allclose(rank_one_exp(e1, -1), minus, atol=1e-15)
        np.testing.assert_allclose(matrix_exp(sym_matrix(np.outer(e1, e1))), plus, atol=1e-12)

    def test_rank_one_matches_expm(self, rng):
        for _ in range(100):
            x = 0.5 * rng.standard_normal(6)
            for sign in (1, -1):
                np.testing.assert_allclose(
                    rank_one_exp(x, sign), expm(sign * np.outer(x, x)), rtol=1e-10, atol=1e-10
                )

    def test_rank_one_rejects_zero_vector(self):
        with pytest.raises(DomainError):
            rank_one_exp(np.zeros(3))


class TestTraceCosh:
    def test_zero(self):
        assert trace_cosh(sym_matrix(np.zeros((4, 4)))) == 4.0

    def test_diagonal(self):
        assert trace_cosh(sym_matrix(np.diag([1.0, -1.0]))) == pytest.approx(2 * math.cosh(1.0))

    def test_dilation_identity(self, random_symmetric):
        a = sym_matrix(random_symmetric(5))
        assert trace_cosh(a) == pytest.approx(0.5 * np.trace(expm(dilation(a))), rel=1e-10)

    def test_overflow_is_reported(self):
        with pytest.raises(PotentialOverflowError):
            trace_cosh(sym_matrix(np.diag([800.0, 1.0])))

    def test_log_domain_survives_overflow(self):
        value = log_trace_cosh(sym_matrix(np.diag([800.0])))
        assert value == pytest.approx(800.0 - math.log(2.0), rel=1e-14)


class TestDilationAndNorms:
    def test_one_by_one(self):
        np.testing.assert_allclose(sorted(np.linalg.eigvalsh(dilation([[2.0]]))), [-2.0, 2.0])

    def test_zero_block(self):
        assert np.array_equal(dilation(np.zeros((2, 3))), np.zeros((5, 5)))

    def test_largest_eigenvalue_is_operator_norm(self, rng):
        a = rng.standard_normal((3, 4))
        assert sym_eigvals(dilation(a))[0] == pytest.approx(operator_norm(a), rel=1e-10)

    @pytest.mark.parametrize(
        "matrix, expected",
        [(np.diag([-3.0, 2.0]), 3.0), (np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)],
    )
    def test_operator_norm(self, matrix, expected):
        assert operator_norm(matrix) == pytest.approx(expected)

    def test_operator_norm_matches_gram(self, rng):
        a = rng.standard_normal((5, 3))
        assert operator_norm(a) == pytest.approx(math.sqrt(np.linalg.eigvalsh(a.T @ a)[-1]), rel=1e-10)


class TestLoewnerOrder:
    def test_identity_below_twice_identity(self):
        assert psd_leq(sym_matrix(np.eye(3)), sym_matrix(2 * np.eye(3)))
        assert not psd_leq(sym_matrix(2 * np.eye(3)), sym_matrix(np.eye(3)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            psd_leq(sym_matrix(np.eye(2)), sym_matrix(np.eye(3)))

    def test_trace_monotone_under_psd_weight(self, random_psd, random_symmetric, rng):
        a = random_psd(4)
        b = sym_matrix(random_symmetric(4))
        h = rng.standard_normal((4, 4))
        c = sym_matrix(b + h @ h.T, symmetrize=True)
        assert psd_leq(b, c, 1e-12)
        assert np.trace(a @ b) <= np.trace(a @ c) + 1e-10

    def test_psd_sqrt_squares_back(self, random_psd):
        a = sym_matrix(random_psd(5), symmetrize=True)
        root = psd_sqrt(a)
        np.testing.assert_allclose(root @ root, a, atol=1e-9)


def test_taylor_truncation_bound(random_symmetric):
    b = random_symmetric(4, scale=0.7)
    norm = operator_norm(b)
    order = math.ceil(norm) + 3
    gap = operator_norm(expm(b) - taylor_exp(b, order))
    assert gap <= norm ** (order + 1) / math.factorial(order + 1) * math.exp(norm) + 1e-14


class TestParallel:
    def test_map_chunks_is_independent_of_threads(self):
        def square(rows: slice) -> np.ndarray:
            return np.arange(rows.start, rows.stop, dtype=float) ** 2

        single = map_chunks(square, 37, threads=1)
        pooled = map_chunks(square, 37, threads=5)
        assert np.array_equal(single, pooled)
        assert np.array_equal(single, np.arange(37, dtype=float) ** 2)

    def test_ties_go_to_smallest_index(self):
        values = np.array([3.0, 1.0 + 1e-12, 1.0, 2.0])
        assert argmin_smallest_index(values, tol=1e-10) == 1
        assert argmin_smallest_index(values, tol=0.0) == 2

    def test_nan_candidate_is_a_domain_error(self):
        with pytest.raises(DomainError, match="Candidate 2"):
            argmin_smallest_index(np.array([1.0, np.nan, 0.5]))

    def test_empty_candidates_are_a_domain_error(self):
        with pytest.raises(DomainError):
            argmin_smallest_index(np.empty(0))
