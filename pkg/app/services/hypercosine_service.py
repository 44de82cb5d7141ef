"""
Matrix hyperbolic cosine greedy selector

Picks, step by step, the candidate index whose matrix keeps the potential
2 tr cosh(theta * running sum) smallest. With |f| <= gamma, E f = 0 and
|E f^2| <= rho^2, the average of the t selected matrices has norm at most
gamma ln(2n) / (t eps) + eps rho^2 / gamma.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from app.core.config import settings
from app.core.exceptions import CertificationError, DomainError, GuardExceededError, OracleError
from app.core.linalg import dilation, matrix_exp, sym_matrix
from app.core.parallel import argmin_smallest_index, map_chunks
from app.models.family import BalancingFamily, SampleFamily

from .base_service import BaseService


@dataclass
class SelectionResult:
    indices: NDArray[np.int64]
    final_norm: float
    bound: float
    # log Phi^{(0)}, ..., log Phi^{(t)} with Phi = 2 tr cosh(W)
    potential_trace: NDArray[np.float64]
    # log of the weighted average of candidate potentials at each step
    average_trace: NDArray[np.float64]
    epsilon: float
    theta: float

    @property
    def t(self) -> int:
        return int(self.indices.shape[0])


@dataclass
class BalanceResult:
    signs: NDArray[np.int64]
    value: float
    bound: float
    selection: SelectionResult | None = None


@dataclass
class FamilyReport:
    m: int
    n: int
    steps_checked: int
    gamma: float
    rho_sq: float
    max_norm: float
    mean_residual: float
    variance_norm: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.max_norm <= self.gamma * (1 + settings.FAMILY_NORM_SLACK)
            and self.mean_residual <= settings.FAMILY_MEAN_TOL
            and self.variance_norm <= self.rho_sq * (1 + settings.FAMILY_NORM_SLACK)
        )


@dataclass
class StepsPlan:
    epsilon: float
    t: int
    bound: float
    formula: str


def theorem_bound(gamma: float, rho_sq: float, n: int, epsilon: float, t: int) -> float:
    return gamma * math.log(2 * n) / (t * epsilon) + epsilon * rho_sq / gamma


class HypercosineService(BaseService):
    """
    Generic greedy selector over a sample family, plus the balancing game
    """

    def select_indices(
        self, family: SampleFamily, epsilon: float, t: int, certify: bool = True
    ) -> SelectionResult:
        """
        Run the greedy selector for t steps.

        Args:
            family: the sample family (zero mean, norm and variance bounded)
            epsilon: accuracy parameter in (0, 1); theta = epsilon / gamma
            t: number of steps
            certify: raise CertificationError if the final norm misses the bound

        Returns:
            SelectionResult with the chosen indices and the log-potential trace
        """
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        if t < 1:
            raise DomainError(f"t must be positive, got {t}")
        if family.steps is not None and t > family.steps:
            raise DomainError(f"Family defines {family.steps} steps, {t} requested")

        n = family.n
        theta = epsilon / family.gamma
        with np.errstate(divide="ignore"):
            log_weights = np.log(np.asarray(family.weights, dtype=np.float64))
        running = np.zeros((n, n))
        indices = np.empty(t, dtype=np.int64)
        potential_trace = np.empty(t + 1)
        potential_trace[0] = math.log(2 * n)
        average_trace = np.empty(t)

        for step in range(t):
            candidates = family.candidates(step)
            log_potentials = self.candidate_log_potentials(running, candidates, theta)
            bad = np.flatnonzero(~np.isfinite(log_potentials))
            if bad.size:
                raise OracleError(step, int(bad[0]), "non-finite potential")

            k = argmin_smallest_index(log_potentials, self.settings.TIE_LOG_TOL)
            indices[step] = k
            potential_trace[step + 1] = log_potentials[k]
            average_trace[step] = float(logsumexp(log_potentials + log_weights))
            running = sym_matrix(running + theta * candidates[k], symmetrize=True)
            logger.debug(f"step {step + 1}/{t}: index {k}, log-potential {log_potentials[k]:.6f}")

        final_norm = float(np.max(np.abs(np.linalg.eigvalsh(running)))) / (theta * t)
        bound = theorem_bound(family.gamma, family.rho_sq, n, epsilon, t)
        result = SelectionResult(
            indices=indices,
            final_norm=final_norm,
            bound=bound,
            potential_trace=potential_trace,
            average_trace=average_trace,
            epsilon=epsilon,
            theta=theta,
        )
        logger.info(f"Selected {t} indices: final norm {final_norm:.6g}, bound {bound:.6g}")
        if certify and final_norm > bound + 1e-8:
            raise CertificationError("final_norm", final_norm, bound)
        return result

    def candidate_log_potentials(
        self, running: NDArray[np.float64], candidates: NDArray[np.float64], theta: float
    ) -> NDArray[np.float64]:
        """log(2 tr cosh(running + theta * f(k))) for every candidate k."""

        def block(rows: slice) -> NDArray[np.float64]:
            lams = np.linalg.eigvalsh(running[None, :, :] + theta * candidates[rows])
            return logsumexp(np.concatenate([lams, -lams], axis=1), axis=1)

        return map_chunks(block, candidates.shape[0], self.threads)

    def growth_violations(self, result: SelectionResult, family: SampleFamily) -> list[int]:
        """Steps whose potential grew by more than exp(eps^2 rho^2 / gamma^2)."""
        allowed = (result.epsilon**2) * family.rho_sq / family.gamma**2
        allowed += math.log1p(self.settings.GROWTH_SLACK)
        growth = np.diff(result.potential_trace)
        return [int(i) + 1 for i in np.flatnonzero(growth > allowed)]

    def balance_matrices(
        self, matrices: list[ArrayLike], azuma: bool = False, certify: bool = True
    ) -> BalanceResult:
        """
        Deterministic signs for the matrix balancing game.

        With N matrices of size d, eps = sqrt(ln(2d) / N) and t = N, so that
        |sum s_i M_i| <= 2 sqrt(N ln(2d)). `azuma` switches to the wider
        eps = sqrt(10 ln(4d) / N) used in the probabilistic argument.
        """
        family = BalancingFamily(matrices)
        count, d = family.steps, family.n
        if azuma:
            epsilon = math.sqrt(10 * math.log(4 * d) / count)
        else:
            epsilon = math.sqrt(math.log(2 * d) / count)
        epsilon = min(epsilon, 0.999)

        selection = self.select_indices(family, epsilon, count, certify=certify)
        signs = BalancingFamily.signs(selection.indices)
        value = self.balance_value(matrices, signs)
        return BalanceResult(
            signs=signs, value=value, bound=selection.bound * count, selection=selection
        )

    def random_signs_baseline(self, matrices: list[ArrayLike], seed: int) -> NDArray[np.int64]:
        rng = np.random.default_rng(seed)
        return rng.choice(np.array([1, -1]), size=len(matrices))

    @staticmethod
    def balance_value(matrices: list[ArrayLike], signs: ArrayLike) -> float:
        total = np.einsum("i,ijk->jk", np.asarray(signs, dtype=np.float64), np.stack(matrices))
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (total + total.T)))))

    def verify_family(self, family: SampleFamily, steps: int | None = None) -> FamilyReport:
        """
        Enumerate the family and measure its norm, zero-mean and variance conditions.
        """
        steps = steps or (1 if family.stationary else family.steps)
        work = float(family.m) * family.n**2 * steps
        if work > self.settings.FAMILY_ENUMERATION_LIMIT:
            raise GuardExceededError(
                f"Enumerating m={family.m}, n={family.n} over {steps} steps needs {work:.3g} "
                f"entries (limit {self.settings.FAMILY_ENUMERATION_LIMIT:.3g})"
            )

        weights = np.asarray(family.weights, dtype=np.float64)
        max_norm = mean_residual = variance_norm = 0.0
        for step in range(steps):
            stack = family.candidates(step)
            max_norm = max(max_norm, float(np.max(np.abs(np.linalg.eigvalsh(stack)))))
            mean = np.einsum("k,kij->ij", weights, stack)
            mean_residual = max(mean_residual, float(np.max(np.abs(mean))))
            second = np.einsum("k,kij,kjl->il", weights, stack, stack)
            second = 0.5 * (second + second.T)
            variance_norm = max(variance_norm, float(np.max(np.abs(np.linalg.eigvalsh(second)))))

        report = FamilyReport(
            m=family.m,
            n=family.n,
            steps_checked=steps,
            gamma=family.gamma,
            rho_sq=family.rho_sq,
            max_norm=max_norm,
            mean_residual=mean_residual,
            variance_norm=variance_norm,
        )
        if not report.passed:
            logger.warning(f"Family check failed: {report}")
        return report

    def moment_bound(self, family: SampleFamily, epsilon: float) -> tuple[float, float]:
        """
        lambda_max(sum_k w_k exp(D(eps f(k) / gamma))) and its ceiling exp(eps^2 rho^2 / gamma^2).
        """
        weights = np.asarray(family.weights, dtype=np.float64)
        stack = family.candidates(0)
        total = np.zeros((2 * family.n, 2 * family.n))
        for k in range(family.m):
            if weights[k] > 0:
                total += weights[k] * matrix_exp(dilation(epsilon * stack[k] / family.gamma))
        value = float(np.linalg.eigvalsh(0.5 * (total + total.T))[-1])
        return value, math.exp(epsilon**2 * family.rho_sq / family.gamma**2)

    @staticmethod
    def steps_for_target(gamma: float, rho_sq: float, n: int, target: float) -> StepsPlan:
        """
        Choose eps and t so that the guarantee equals `target`: half of the
        budget goes to eps rho^2 / gamma, the rest to gamma ln(2n) / (t eps).
        """
        if target <= 0:
            raise DomainError("target must be positive")
        epsilon = min(target * gamma / (2 * rho_sq), 0.999)
        remaining = target - epsilon * rho_sq / gamma
        t = max(1, math.ceil(gamma * math.log(2 * n) / (epsilon * remaining)))
        return StepsPlan(
            epsilon=epsilon,
            t=t,
            bound=theorem_bound(gamma, rho_sq, n, epsilon, t),
            formula="eps = min(target*gamma/(2*rho^2), 0.999); "
            "t = ceil(gamma*ln(2n) / (eps*(target - eps*rho^2/gamma)))",
        )
