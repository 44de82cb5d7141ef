"""
Element-wise matrix sparsification.

The generic path derandomizes entry sampling with the hyperbolic cosine
greedy over the dilation family. The SDD paths split A = C C^T + diag(A) - R
and sparsify the column outer products of C, by sampling or deterministically.
"""

import math

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from app.core.exceptions import CertificationError, DomainError, GuardExceededError
from app.core.linalg import SymMatrix, operator_norm, sym_matrix, sym_norm
from app.core.parallel import argmin_smallest_index, map_chunks
from app.models.outer import OuterProductSum
from app.models.sdd import EntryDilationFamily, SddDecomposition, SparsifiedMatrix, square_matrix

from .base_service import BaseService
from .hypercosine_service import theorem_bound
from .spectral_service import SpectralService

# accuracy handed to the greedy; the bound then stays below eps/2
GENERIC_EPSILON_ALG = 0.99
SVD_BLOCK = 256
ERROR_SLACK = 1e-9


def theta_of(a: ArrayLike) -> float:
    """(||A||_inf / ||A||)^2, the least theta for which A is theta-SDD."""
    a = np.asarray(a, dtype=np.float64)
    norm = operator_norm(a)
    if norm == 0:
        raise DomainError("theta is undefined for the zero matrix")
    return (float(np.max(np.abs(a).sum(axis=1))) / norm) ** 2


def zero_small_entries(a: ArrayLike, epsilon: float) -> NDArray[np.float64]:
    """Zero every entry below eps / (2n) in magnitude; assumes ||A|| = 1."""
    a = np.array(a, dtype=np.float64)
    return np.where(np.abs(a) < epsilon / (2 * a.shape[0]), 0.0, a)


def stable_rank(a: ArrayLike) -> float:
    """||A||_F^2 / ||A||^2 from the entries."""
    a = np.asarray(a, dtype=np.float64)
    norm = operator_norm(a)
    if norm == 0:
        raise DomainError("Stable rank is undefined for the zero matrix")
    return float(np.sum(a * a)) / norm**2


def stable_rank_from_spectrum(a: ArrayLike) -> float:
    """sum sigma_i^2 / sigma_1^2 from the singular values."""
    sigma = np.linalg.svd(np.asarray(a, dtype=np.float64), compute_uv=False)
    if sigma[0] == 0:
        raise DomainError("Stable rank is undefined for the zero matrix")
    return float(np.sum(sigma**2) / sigma[0] ** 2)


def power_norm(a: ArrayLike, iterations: int, seed: int = 0) -> float:
    """Power iteration estimate of ||A|| (a lower bound) for symmetric A."""
    a = np.asarray(a, dtype=np.float64)
    x = np.random.default_rng(seed).standard_normal(a.shape[0])
    estimate = 0.0
    for _ in range(iterations):
        y = a @ x
        norm = float(np.linalg.norm(y))
        if norm == 0:
            return 0.0
        estimate = norm / float(np.linalg.norm(x))
        x = y / norm
    return estimate


class ElementwiseService(BaseService):
    """
    Generic and SDD element-wise sparsifiers
    """

    def sdd_decompose(self, a: ArrayLike) -> SddDecomposition:
        return SddDecomposition.from_matrix(sym_matrix(a))

    def generic_budget(self, n: int, sr: float, epsilon: float) -> int:
        return math.ceil(28 * n * math.log(math.sqrt(2) * n) * sr / epsilon**2)

    def sparsify_generic(self, a: ArrayLike, epsilon: float, certify: bool = True) -> SparsifiedMatrix:
        """
        Deterministic element-wise sparsifier for any square A.

        Runs on A / ||A||: entries below eps/(2n) are zeroed (cost <= eps/2),
        then the greedy picks rescaled single entries until the average is
        within eps/2 of the zeroed matrix or the sample budget
        t = ceil(28 n ln(sqrt2 n) sr(A) / eps^2) is spent.
        """
        a = square_matrix(a)
        n = a.shape[0]
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        if n > self.settings.GENERIC_ELEMENTWISE_MAX_N:
            raise GuardExceededError(
                f"The generic sparsifier is limited to n <= "
                f"{self.settings.GENERIC_ELEMENTWISE_MAX_N}; use the SDD path for larger matrices"
            )
        family = self.dilation_family(a, epsilon)
        scale = operator_norm(a)
        sr = stable_rank(a)
        budget = self.generic_budget(n, sr, epsilon)
        trimmed = family.a
        theta = GENERIC_EPSILON_ALG / family.gamma
        logger.info(
            f"Generic sparsification: n={n}, {family.m} candidate entries, sr={sr:.6g}, budget {budget}"
        )

        total = np.zeros((n, n))
        steps = 0
        error = math.inf
        for step in range(budget):
            base = theta * (total - (step + 1) * trimmed)
            log_potentials = self.candidate_log_potentials(base, family, theta)
            k = argmin_smallest_index(log_potentials, self.settings.TIE_LOG_TOL)
            total[family.row[k], family.col[k]] += family.coefficients[k]
            steps = step + 1
            error = operator_norm(total / steps - trimmed)
            logger.debug(
                f"step {steps}: entry ({family.row[k] + 1}, {family.col[k] + 1}), error {error:.6g}"
            )
            if error <= epsilon / 2:
                break

        bound = theorem_bound(family.gamma, family.rho_sq, family.n, GENERIC_EPSILON_ALG, steps)
        logger.info(f"Stopped after {steps} samples, greedy error {error:.6g} (a priori {bound:.6g})")
        approx = scale * total / steps
        return self._finish(a, approx, epsilon, budget, scale, theta_of(a), steps, certify)

    @staticmethod
    def dilation_family(a: ArrayLike, epsilon: float) -> EntryDilationFamily:
        """
        The entry sampling family of A / ||A|| after zeroing entries below eps/(2n);
        gamma = 4 n sr(A) / eps and rho^2 = n sr(A).
        """
        a = square_matrix(a)
        n = a.shape[0]
        scale = operator_norm(a)
        if scale == 0:
            raise DomainError("Cannot sparsify the zero matrix")
        sr = stable_rank(a)
        trimmed = zero_small_entries(a / scale, epsilon)
        return EntryDilationFamily(trimmed, gamma=4 * n * sr / epsilon, rho_sq=n * sr)

    def candidate_log_potentials(
        self, base: NDArray[np.float64], family: EntryDilationFamily, theta: float
    ) -> NDArray[np.float64]:
        """
        log(2 tr cosh D(base + theta c_l E_l)) for every candidate entry l.
        D(Y) has eigenvalues +-sigma_i(Y), so the potential comes from an n x n SVD.
        """
        steps = theta * family.coefficients

        def block(rows: slice) -> NDArray[np.float64]:
            out = []
            for start in range(rows.start, rows.stop, SVD_BLOCK):
                ks = np.arange(start, min(start + SVD_BLOCK, rows.stop))
                batch = np.repeat(base[None, :, :], ks.shape[0], axis=0)
                batch[np.arange(ks.shape[0]), family.row[ks], family.col[ks]] += steps[ks]
                sigma = np.linalg.svd(batch, compute_uv=False)
                out.append(math.log(2.0) + logsumexp(np.concatenate([sigma, -sigma], axis=1), axis=1))
            return np.concatenate(out)

        return map_chunks(block, family.m, self.threads)

    def sdd_sparsify_randomized(
        self,
        a: ArrayLike,
        norm_a: float,
        epsilon: float,
        seed: int,
        certify: bool = False,
    ) -> SparsifiedMatrix:
        """
        Sample t = ceil(38 n theta ln(sqrt2 n) / eps^2) columns of C with
        p_l = ||C^l||^2 / ||C||_F^2 and return A~ = C~ C~^T + diag(A) - R.
        `norm_a` is the caller's estimate of ||A|| and fixes theta.
        """
        a = sym_matrix(a)
        n = a.shape[0]
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        if not norm_a > 0:
            raise DomainError(f"norm estimate must be positive, got {norm_a}")
        theta = (float(np.max(np.abs(a).sum(axis=1))) / norm_a) ** 2
        t = math.ceil(38 * n * theta * math.log(math.sqrt(2) * n) / epsilon**2) if n > 1 else 1
        decomposition = SddDecomposition.from_matrix(a)
        budget = n + 2 * t
        logger.info(f"Randomized SDD sparsification: n={n}, theta={theta:.6g}, t={t}, seed={seed}")

        if decomposition.size == 0:
            return self._finish(a, a, epsilon, budget, norm_a, theta, 0, certify)

        magnitudes = np.abs(decomposition.values)
        p = magnitudes / magnitudes.sum()
        rng = np.random.default_rng(seed)
        counts = np.bincount(rng.choice(decomposition.size, size=t, p=p), minlength=decomposition.size)
        approx = decomposition.assemble(counts / (t * p))
        return self._finish(a, approx, epsilon, budget, norm_a, theta, t, certify)

    def sdd_sparsify_deterministic(
        self, a: ArrayLike, epsilon: float, certify: bool = True
    ) -> SparsifiedMatrix:
        """
        Spectrally sparsify C C^T at eps' = eps / (10 sqrt(theta)) and reassemble.
        """
        a = sym_matrix(a)
        if not 0 < epsilon < 0.5:
            raise DomainError(f"epsilon must lie in (0, 1/2), got {epsilon}")
        theta = theta_of(a)
        inner = epsilon / (10 * math.sqrt(theta))
        return self._sdd_spectral(a, epsilon, inner, theta, certify, barrier_only=False)

    def sdd_sparsify_bss(self, a: ArrayLike, epsilon: float, certify: bool = True) -> SparsifiedMatrix:
        """
        Two-barrier reweighting of the columns of C at eps' = eps / (3 (1 + sqrt(theta))),
        without the isotropic stage.
        """
        a = sym_matrix(a)
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        theta = theta_of(a)
        inner = epsilon / (3 * (1 + math.sqrt(theta)))
        return self._sdd_spectral(a, epsilon, inner, theta, certify, barrier_only=True)

    def _sdd_spectral(
        self,
        a: SymMatrix,
        epsilon: float,
        inner: float,
        theta: float,
        certify: bool,
        barrier_only: bool,
    ) -> SparsifiedMatrix:
        n = a.shape[0]
        scale = sym_norm(a)
        decomposition = SddDecomposition.from_matrix(a)
        budget = n + math.ceil(2 * n / inner**2)
        logger.info(
            f"SDD sparsification: n={n}, {decomposition.size} pairs, theta={theta:.6g}, eps'={inner:.6g}"
        )
        if decomposition.size == 0:
            return self._finish(a, a, epsilon, budget, scale, theta, 0, certify)

        spectral = SpectralService(self.settings, self.threads)
        ops = OuterProductSum.from_vectors(decomposition.column_vectors())
        if barrier_only:
            whitening = spectral.inverse_sqrt(ops.a)
            u = (ops.vectors @ whitening.basis) / np.sqrt(whitening.eigenvalues)
            weights = spectral.bss_reweight(u, inner, certify=certify).s
        else:
            weights = spectral.spectral_sparsify(ops, inner, certify=certify).weights.s
        approx = decomposition.assemble(weights)
        support = int(np.count_nonzero(weights))
        return self._finish(a, approx, epsilon, budget, scale, theta, support, certify)

    def _finish(
        self,
        a: NDArray[np.float64],
        approx: NDArray[np.float64],
        epsilon: float,
        budget: int,
        scale: float,
        theta: float,
        t: int,
        certify: bool,
    ) -> SparsifiedMatrix:
        error = reference = None
        if certify:
            error = operator_norm(a - approx)
            reference = operator_norm(a)
            logger.info(f"Certified ||A - A~|| = {error:.6g} (target {epsilon * reference:.6g})")
            if error > epsilon * reference * (1 + ERROR_SLACK):
                raise CertificationError("error", error, epsilon * reference)
        result = SparsifiedMatrix.from_dense(
            approx,
            budget=budget,
            error=error,
            scale=scale,
            theta=theta,
            t=t,
            symmetric=bool(np.array_equal(approx, approx.T)),
            norm=reference,
        )
        if certify and result.nnz > budget:
            raise CertificationError("nnz", result.nnz, budget)
        return result
