import itertools
import math

import numpy as np
import pytest

from app.core.exceptions import DomainError, NormBoundError
from app.models.family import BalancingFamily, DenseFamily
from app.models.group import CayleyFamily
from app.services.hypercosine_service import HypercosineService, theorem_bound


@pytest.fixture
def service():
    return HypercosineService(threads=1)


def symmetric_pair_family(random_symmetric, n: int, half: int) -> DenseFamily:
    """Zero-mean family {M_1, ..., M_h, -M_1, ..., -M_h} under uniform weights."""
    base = [random_symmetric(n) for _ in range(half)]
    return DenseFamily(base + [-m for m in base])


def unit_norm_matrices(random_symmetric, count: int, d: int) -> list[np.ndarray]:
    matrices = (random_symmetric(d) for _ in range(count))
    return [m / np.max(np.abs(np.linalg.eigvalsh(m))) for m in matrices]


class TestSelectIndices:
    def test_zero_family(self, service):
        family = DenseFamily([np.zeros((3, 3))], gamma=1.0, rho_sq=1.0)
        result = service.select_indices(family, 0.5, 4)
        assert result.indices.tolist() == [0, 0, 0, 0]
        assert result.final_norm == 0.0
        assert np.allclose(result.potential_trace, math.log(6))

    def test_two_candidates_meet_bound(self, service):
        x = np.array([[1.0, 0.0], [0.0, -1.0]])
        family = DenseFamily([-x, x])
        result = service.select_indices(family, 0.5, 3)
        assert result.final_norm <= result.bound
        # some sign sequence reaches the bound, so the greedy one must too
        best = min(
            abs(sum(signs)) / 3 for signs in itertools.product([-1, 1], repeat=3)
        )
        assert best <= result.bound

    @pytest.mark.parametrize("epsilon", [0.2, 0.5])
    @pytest.mark.parametrize("steps_factor", [1, 4])
    def test_random_families_respect_bound(self, service, random_symmetric, epsilon, steps_factor):
        n = 8
        family = symmetric_pair_family(random_symmetric, n, half=6)
        t = steps_factor * n
        result = service.select_indices(family, epsilon, t)
        assert result.final_norm <= theorem_bound(family.gamma, family.rho_sq, n, epsilon, t) * (1 + 1e-9)
        assert result.potential_trace[0] == pytest.approx(math.log(2 * n))
        # the chosen candidate never does worse than the weighted average
        assert np.all(result.potential_trace[1:] <= result.average_trace + 1e-9)
        assert service.growth_violations(result, family) == []

    def test_potential_controls_final_norm(self, service, random_symmetric):
        family = symmetric_pair_family(random_symmetric, 5, half=4)
        result = service.select_indices(family, 0.4, 12)
        assert result.final_norm * result.theta * result.t <= result.potential_trace[-1] + 1e-12

    def test_selection_is_independent_of_threads(self, random_symmetric):
        family = symmetric_pair_family(random_symmetric, 6, half=20)
        single = HypercosineService(threads=1).select_indices(family, 0.5, 10)
        pooled = HypercosineService(threads=4).select_indices(family, 0.5, 10)
        assert np.array_equal(single.indices, pooled.indices)

    @pytest.mark.parametrize("epsilon", [0.0, 1.0, -0.1])
    def test_rejects_epsilon_outside_unit_interval(self, service, epsilon):
        family = DenseFamily([np.eye(2), -np.eye(2)])
        with pytest.raises(DomainError):
            service.select_indices(family, epsilon, 2)

    def test_rejects_more_steps_than_the_family_defines(self, service):
        with pytest.raises(DomainError):
            service.select_indices(BalancingFamily([np.eye(2)]), 0.5, 2)


class TestBalancing:
    def test_single_scalar(self, service):
        result = service.balance_matrices([[[1.0]]])
        assert result.value == 1.0
        assert abs(int(result.signs[0])) == 1

    def test_random_diagonal_signs(self, service, rng):
        d = 16
        matrices = [np.diag(rng.choice([-1.0, 1.0], size=d)) for _ in range(d)]
        result = service.balance_matrices(matrices)
        assert result.value <= 2 * math.sqrt(d * math.log(2 * d)) + 1e-9
        assert result.value == pytest.approx(service.balance_value(matrices, result.signs))

    def test_commuting_projections(self, service):
        d = 4
        matrices = [np.outer(e, e) for e in np.eye(d)]
        result = service.balance_matrices(matrices)
        assert result.value <= 2 * math.sqrt(d * math.log(2 * d))

    def test_azuma_variant_still_bounded(self, service, random_symmetric):
        matrices = unit_norm_matrices(random_symmetric, 10, 4)
        result = service.balance_matrices(matrices, azuma=True, certify=False)
        assert result.value <= result.bound

    def test_random_unit_norm_family_meets_deterministic_bound(self, service, random_symmetric):
        n = 64
        matrices = unit_norm_matrices(random_symmetric, n, n)
        result = service.balance_matrices(matrices)
        assert result.value <= 2 * math.sqrt(n * math.log(2 * n)) + 1e-9

    def test_random_signs_usually_meet_baseline_bound(self, service, random_symmetric):
        n = 64
        matrices = unit_norm_matrices(random_symmetric, n, n)
        bound = 4 * math.sqrt(n * math.log(n))
        values = [service.balance_value(matrices, service.random_signs_baseline(matrices, seed)) for seed in range(20)]
        assert sum(value <= bound for value in values) >= 10

    def test_rejects_large_norm_and_names_index(self, service):
        with pytest.raises(NormBoundError) as info:
            service.balance_matrices([np.eye(2), 2 * np.eye(2)])
        assert info.value.index == 1

    def test_random_baseline_is_seeded(self, service):
        matrices = [np.eye(2)] * 12
        first = service.random_signs_baseline(matrices, seed=7)
        assert np.array_equal(first, service.random_signs_baseline(matrices, seed=7))
        assert set(first.tolist()) <= {-1, 1}


class TestFamilies:
    def test_balancing_family_conditions(self, service, random_symmetric):
        matrices = [m / np.max(np.abs(np.linalg.eigvalsh(m))) for m in (random_symmetric(4) for _ in range(3))]
        report = service.verify_family(BalancingFamily(matrices))
        assert report.passed
        assert report.steps_checked == 3
        assert report.max_norm == pytest.approx(1.0)
        assert report.mean_residual <= 1e-12

    def test_cayley_family_conditions(self, service, z8):
        report = service.verify_family(CayleyFamily(z8))
        assert report.passed
        assert report.max_norm <= 2.0 + 1e-9
        assert report.variance_norm <= 2.0 + 1e-9

    def test_moment_bound(self, service, random_symmetric):
        family = symmetric_pair_family(random_symmetric, 4, half=5)
        value, ceiling = service.moment_bound(family, 0.5)
        assert value <= ceiling * (1 + 1e-9)

    def test_dense_family_rejects_zero_bounds(self):
        with pytest.raises(DomainError):
            DenseFamily([np.zeros((2, 2))])


@pytest.mark.parametrize("target", [0.5, 1.0, 2.0])
def test_steps_for_target(target):
    plan = HypercosineService.steps_for_target(gamma=2.0, rho_sq=2.0, n=16, target=target)
    assert plan.bound <= target + 1e-12
    assert plan.t >= 1
