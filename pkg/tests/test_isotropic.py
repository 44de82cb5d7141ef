import numpy as np
import pytest

from app.core.exceptions import DimensionMismatchError, DomainError, NodeCollisionError
from app.core.linalg import log_potential
from app.core.parallel import argmin_smallest_index
from app.models.rows import DiagonalPlusRankOne, IsotropicFamily, RowFamily
from app.services.hypercosine_service import HypercosineService
from app.services.isotropic_service import (
    IsotropicService,
    cauchy_apply,
    loewner_vector,
    secular_eigs,
    secular_eigs_batch,
)


@pytest.fixture
def service():
    return IsotropicService(threads=1)


class TestSecularSolver:
    def test_batch_matches_dense(self, rng):
        n, count = 7, 200
        sigma = np.sort(rng.standard_normal(n))
        z = rng.standard_normal((count, n))
        lams = secular_eigs_batch(sigma, z)
        for k in range(count):
            expected = np.linalg.eigvalsh(np.diag(sigma) + np.outer(z[k], z[k]))
            np.testing.assert_allclose(lams[k], expected, atol=1e-8)

    def test_row_roots_do_not_depend_on_the_batch(self, rng):
        sigma = np.sort(rng.standard_normal(5)) * 1e-3
        small = rng.standard_normal(5) * 1e-3
        big = rng.standard_normal(5) * 1e3
        alone = secular_eigs_batch(sigma, small[None, :])[0]
        stacked = secular_eigs_batch(sigma, np.vstack([small, big]))
        assert np.array_equal(alone, stacked[0])

    def test_candidate_potentials_are_independent_of_threads(self, rng):
        lams = np.sort(rng.standard_normal(4)) * 1e-3
        z = rng.standard_normal((23, 4)) * np.logspace(-3, 3, 23)[:, None]
        single = IsotropicService(threads=1).candidate_log_potentials(lams, z, 0.1, 3)
        pooled = IsotropicService(threads=4).candidate_log_potentials(lams, z, 0.1, 3)
        assert np.array_equal(single, pooled)

    def test_zero_update_keeps_the_diagonal(self):
        sigma = np.array([-1.0, 0.5, 2.0])
        np.testing.assert_allclose(secular_eigs_batch(sigma, np.zeros((1, 3)))[0], sigma, atol=1e-10)

    def test_rejects_unsorted_sigma(self):
        with pytest.raises(DomainError):
            secular_eigs_batch(np.array([2.0, 1.0]), np.ones((1, 2)))

    def test_eigenvectors_reconstruct(self, rng):
        d = DiagonalPlusRankOne(sigma=rng.standard_normal(6), z=rng.standard_normal(6))
        lams, q = secular_eigs(d, vectors=True)
        assert np.all(np.diff(lams) >= 0)
        np.testing.assert_allclose(q.T @ q, np.eye(6), atol=1e-8)
        np.testing.assert_allclose((q * lams) @ q.T, d.dense(), atol=1e-8)

    def test_tied_diagonal_falls_back(self):
        d = DiagonalPlusRankOne(sigma=[1.0, 1.0, 3.0], z=[0.5, -0.2, 1.0])
        lams, q = secular_eigs(d, vectors=True)
        np.testing.assert_allclose((q * lams) @ q.T, d.dense(), atol=1e-10)

    def test_deflated_coordinates(self):
        d = DiagonalPlusRankOne(sigma=[0.0, 1.0, 2.0], z=[1.0, 0.0, 1.0])
        lams, q = secular_eigs(d, vectors=True)
        np.testing.assert_allclose(lams, np.linalg.eigvalsh(d.dense()), atol=1e-10)
        np.testing.assert_allclose((q * lams) @ q.T, d.dense(), atol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            DiagonalPlusRankOne(sigma=[1.0, 2.0], z=[1.0])

    def test_loewner_vector_reproduces_eigenvalues(self, rng):
        sigma = np.sort(rng.standard_normal(5))
        z = rng.standard_normal(5)
        lams = np.linalg.eigvalsh(np.diag(sigma) + np.outer(z, z))
        z_hat = loewner_vector(sigma, lams, z)
        np.testing.assert_allclose(np.abs(z_hat), np.abs(z), rtol=1e-6)
        np.testing.assert_allclose(
            np.linalg.eigvalsh(np.diag(sigma) + np.outer(z_hat, z_hat)), lams, atol=1e-9
        )


class TestCauchy:
    def test_matches_dense_product(self, rng):
        t_nodes = np.arange(5) + 0.5
        s_nodes = np.arange(4, dtype=float)
        x = rng.standard_normal(4)
        dense = 1.0 / (t_nodes[:, None] - s_nodes[None, :])
        np.testing.assert_allclose(cauchy_apply(t_nodes, s_nodes, x), dense @ x, rtol=1e-12)

    def test_collision_names_one_based_nodes(self):
        with pytest.raises(NodeCollisionError) as info:
            cauchy_apply([1.0, 2.0], [0.0, 2.0], [1.0, 1.0])
        assert (info.value.i, info.value.j) == (2, 2)


class TestRowFamily:
    def test_rejects_non_isotropic_rows(self):
        with pytest.raises(DomainError):
            RowFamily.from_rows(2 * np.eye(3))

    def test_family_missing_a_direction_is_rejected(self):
        half = 1 / np.sqrt(2)
        with pytest.raises(DomainError, match="isotropic"):
            RowFamily.from_rows([[half, 0.0], [half, 0.0]])

    def test_drops_zero_rows(self, orthonormal_rows):
        rows = orthonormal_rows(6, 3)
        padded = np.vstack([rows[:2], np.zeros((1, 3)), rows[2:]])
        family = RowFamily.from_rows(padded)
        assert family.m == 6
        assert family.source_index.tolist() == [0, 1, 3, 4, 5, 6]
        assert family.p.sum() == pytest.approx(1.0)

    def test_isotropic_family_conditions(self, orthonormal_rows):
        family = IsotropicFamily(RowFamily.from_rows(orthonormal_rows(16, 4)))
        report = HypercosineService(threads=1).verify_family(family)
        assert report.passed
        assert report.gamma == report.rho_sq == 4.0


class TestIsotropicSparsify:
    def test_identity_rows(self, service):
        result = service.isotropic_sparsify(RowFamily.from_rows(np.eye(4)), 0.5)
        assert result.residual <= 0.5
        assert result.t <= result.budget

    def test_random_rows_reach_target(self, service, orthonormal_rows):
        family = RowFamily.from_rows(orthonormal_rows(64, 4))
        result = service.isotropic_sparsify(family, 0.5)
        assert result.residual <= 0.5
        assert result.residual == pytest.approx(service.residual(family, result.indices, result.scalars))
        weights = result.weights(family.m)
        np.testing.assert_allclose(
            (family.rows * weights[:, None]).T @ family.rows, np.eye(4), atol=0.5 + 1e-12
        )

    def test_fixed_step_count(self, service, orthonormal_rows):
        family = RowFamily.from_rows(orthonormal_rows(32, 3))
        result = service.isotropic_sparsify(family, 0.5, t=7, certify=False)
        assert result.t == 7
        np.testing.assert_allclose(result.scalars, 1.0 / (7 * family.p[result.indices]))

    def test_matches_generic_selector(self, service, orthonormal_rows):
        family = RowFamily.from_rows(orthonormal_rows(32, 4))
        assert service.equivalence_audit(family, 0.5, t_small=10)

    def test_two_basis_rows_alternate(self, service):
        result = service.isotropic_sparsify(RowFamily.from_rows(np.eye(2)), 0.5, t=8, certify=False)
        assert result.indices.tolist() == [0, 1] * 4
        assert result.residual == pytest.approx(0.0, abs=1e-12)

    def test_lone_direction_row_is_always_selected(self, service):
        half = 1 / np.sqrt(2)
        family = RowFamily.from_rows([[half, 0.0], [half, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(family.p, [0.25, 0.25, 0.5])
        result = service.isotropic_sparsify(family, 0.5)
        assert 2 in result.indices.tolist()
        assert result.residual <= 0.5

    def test_secular_potentials_match_dense_spectra(self, service, rng):
        n = 5
        lams = np.sort(rng.standard_normal(n))
        z = rng.standard_normal((30, n))
        theta, step = 0.05, 4
        fast = service.candidate_log_potentials(lams, z, theta, step)
        dense = np.array(
            [log_potential(theta * (np.linalg.eigvalsh(np.diag(lams) + np.outer(row, row)) - step)) for row in z]
        )
        np.testing.assert_allclose(fast, dense, atol=1e-9)
        assert argmin_smallest_index(fast) == argmin_smallest_index(dense)

    def test_eigenvalue_perturbation_moves_log_potential_at_most_delta(self, rng):
        shifted = rng.standard_normal(8)
        for delta in (1e-6, 1e-3, 0.1):
            jitter = rng.uniform(-delta, delta, size=8)
            gap = abs(log_potential(shifted + jitter) - log_potential(shifted))
            assert gap <= delta + 1e-12

    def test_pooled_fast_path_matches_generic_selector(self, orthonormal_rows):
        family = RowFamily.from_rows(orthonormal_rows(24, 3))
        pooled = IsotropicService(threads=3)
        assert pooled.equivalence_audit(family, 0.5, t_small=12)

    def test_selection_is_independent_of_threads(self, orthonormal_rows):
        family = RowFamily.from_rows(orthonormal_rows(48, 4))
        single = IsotropicService(threads=1).isotropic_sparsify(family, 0.5, t=15, certify=False)
        pooled = IsotropicService(threads=4).isotropic_sparsify(family, 0.5, t=15, certify=False)
        assert np.array_equal(single.indices, pooled.indices)

    @pytest.mark.slow
    def test_acceptance_scale(self, service, orthonormal_rows):
        family = RowFamily.from_rows(orthonormal_rows(256, 16))
        result = service.isotropic_sparsify(family, 0.3)
        assert result.residual <= 0.3
        assert result.t <= result.budget
