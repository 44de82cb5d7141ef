"""
Isotropic sparsification with diagonal-plus-rank-one eigenvalue updates.

The greedy runs on f(k) = z_k z_k^T - I with z_k = row_k / sqrt(p_k). Instead of
an eigensolve per candidate, the running sum is kept as its eigenvalues Lambda and
the rescaled rows Z expressed in its eigenbasis; a candidate's spectrum is then the
spectrum of Lambda + Z_k Z_k^T, found from the secular equation.
"""

import math
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from app.core.config import settings
from app.core.exceptions import (
    CertificationError,
    DimensionMismatchError,
    DomainError,
    EigenSolverError,
    GuardExceededError,
    NodeCollisionError,
)
from app.core.linalg import sym_eigvals
from app.core.parallel import argmin_smallest_index, map_chunks
from app.models.rows import DiagonalPlusRankOne, IsotropicFamily, RowFamily

from .base_service import BaseService
from .hypercosine_service import HypercosineService

BASIS_CHECK_EVERY = 10
BASIS_CHECK_TOL = 1e-7


@dataclass
class SparseIsotropicResult:
    indices: NDArray[np.int64]
    scalars: NDArray[np.float64]
    residual: float
    epsilon: float
    theta: float
    budget: int
    c: float | None
    potential_trace: NDArray[np.float64]

    @property
    def t(self) -> int:
        return int(self.indices.shape[0])

    def weights(self, m: int) -> NDArray[np.float64]:
        """Scalars accumulated per row index."""
        return np.bincount(self.indices, weights=self.scalars, minlength=m)


def cauchy_apply(
    t_nodes: ArrayLike, s_nodes: ArrayLike, x: ArrayLike, tol: float | None = None
) -> NDArray[np.float64]:
    """
    C x with C_ij = 1 / (t_i - s_j), evaluated exactly in O(mn).

    `x` may be a vector or an (n, r) block. `tol` is the accuracy a fast
    approximate backend would target; the exact product ignores it.
    """
    t_nodes = np.asarray(t_nodes, dtype=np.float64).ravel()
    s_nodes = np.asarray(s_nodes, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != s_nodes.shape[0]:
        raise DimensionMismatchError(f"x has {x.shape[0]} rows, expected {s_nodes.shape[0]}")
    diff = t_nodes[:, None] - s_nodes[None, :]
    collisions = np.argwhere(diff == 0)
    if collisions.shape[0]:
        i, j = collisions[0]
        raise NodeCollisionError(int(i) + 1, int(j) + 1)
    return (1.0 / diff) @ x


def secular_eigs_batch(
    sigma: NDArray[np.float64],
    z: NDArray[np.float64],
    tol: float | None = None,
    deflation_tol: float | None = None,
    max_iter: int | None = None,
) -> NDArray[np.float64]:
    """
    Ascending eigenvalues of diag(sigma) + z_k z_k^T for every row z_k of z.

    `sigma` must be sorted ascending. By interlacing the j-th eigenvalue lies in
    [sigma_j, sigma_{j+1}] (the last one in [sigma_n, sigma_n + |z|^2]); each is
    bracketed there and bisected on the eigenvalue count
        N(lam) = #{sigma_i < lam} - [1 + sum_i z_i^2 / (sigma_i - lam) < 0].
    Entries with |z_i| below deflation_tol * |z| are dropped from the secular sum.
    """
    tol = settings.SECULAR_TOL if tol is None else tol
    deflation_tol = settings.SECULAR_DEFLATION_TOL if deflation_tol is None else deflation_tol
    max_iter = settings.SECULAR_MAX_ITER if max_iter is None else max_iter

    sigma = np.asarray(sigma, dtype=np.float64)
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    count, n = z.shape
    if sigma.shape != (n,):
        raise DimensionMismatchError(f"sigma has shape {sigma.shape}, expected ({n},)")
    if np.any(np.diff(sigma) < 0):
        raise DomainError("sigma must be sorted ascending")

    w = z * z
    norm_sq = w.sum(axis=1)
    active = w > (deflation_tol**2) * norm_sq[:, None]
    w = np.where(active, w, 0.0)

    lo = np.broadcast_to(sigma, (count, n)).copy()
    hi = np.empty((count, n))
    hi[:, :-1] = sigma[1:]
    hi[:, -1] = sigma[-1] + norm_sq
    # each row stops on its own bracket width, so its roots do not depend on the batch
    row_stop = tol * np.maximum(float(np.max(np.abs(sigma))) + norm_sq, 1.0)
    slots = np.arange(n)

    for _ in range(max_iter):
        open_rows = np.max(hi - lo, axis=1) > row_stop
        if not np.any(open_rows):
            break
        mid = 0.5 * (lo + hi)
        secular = np.ones((count, n))
        with np.errstate(divide="ignore", invalid="ignore"):
            for i in range(n):
                ratio = w[:, i, None] / (sigma[i] - mid)
                secular += np.where(active[:, i, None], ratio, 0.0)
        below = np.searchsorted(sigma, mid, side="left") - (secular < 0)
        left = below <= slots[None, :]
        lo = np.where(open_rows[:, None] & left, mid, lo)
        hi = np.where(open_rows[:, None] & ~left, mid, hi)

    return 0.5 * (lo + hi)


def secular_eigs(
    d: DiagonalPlusRankOne, vectors: bool = False
) -> tuple[NDArray[np.float64], NDArray[np.float64] | None]:
    """
    Eigenvalues (ascending) of diag(sigma) + z z^T and, on demand, eigenvectors.

    Eigenvectors of non-deflated roots are (diag(sigma) - lam I)^-1 z_hat with z_hat
    recomputed from the roots so the columns stay orthogonal; deflated coordinates
    keep their unit vectors. Tied sigma values fall back to the dense eigensolver.
    """
    order = np.argsort(d.sigma, kind="stable")
    sigma = d.sigma[order]
    z = d.z[order]
    lams = secular_eigs_batch(sigma, z[None, :])[0]
    _assert_interlacing(sigma, z, lams)
    if not vectors:
        return lams, None

    n = d.n
    z_norm = float(np.linalg.norm(z))
    scale = max(1.0, float(np.max(np.abs(sigma))) + z_norm**2)
    tied = np.any(np.diff(sigma) <= settings.SECULAR_DEFLATION_TOL * scale)
    if tied:
        dense_lams, q = np.linalg.eigh(d.dense())
        return dense_lams, q

    active = np.abs(z) > settings.SECULAR_DEFLATION_TOL * z_norm
    vecs = np.zeros((n, n))
    values = np.empty(n)
    deflated = np.flatnonzero(~active)
    values[: deflated.shape[0]] = sigma[deflated]
    vecs[deflated, np.arange(deflated.shape[0])] = 1.0

    nd = np.flatnonzero(active)
    if nd.shape[0]:
        sub_sigma, sub_z = sigma[nd], z[nd]
        sub_lams = secular_eigs_batch(sub_sigma, sub_z[None, :])[0]
        z_hat = loewner_vector(sub_sigma, sub_lams, sub_z)
        try:
            block = -cauchy_apply(sub_lams, sub_sigma, np.diag(z_hat)).T
        except NodeCollisionError:
            block = np.full((nd.shape[0], nd.shape[0]), np.nan)
        norms = np.linalg.norm(block, axis=0)
        if not np.all(np.isfinite(block)) or np.any(norms == 0):
            dense_lams, q = np.linalg.eigh(d.dense())
            return dense_lams, q
        cols = np.arange(deflated.shape[0], n)
        values[cols] = sub_lams
        vecs[np.ix_(nd, cols)] = block / norms

    rank = np.argsort(values, kind="stable")
    q = np.empty((n, n))
    q[order] = vecs[:, rank]
    return values[rank], q


def loewner_vector(
    sigma: NDArray[np.float64], lams: NDArray[np.float64], z: NDArray[np.float64]
) -> NDArray[np.float64]:
    """
    The vector z_hat for which diag(sigma) + z_hat z_hat^T has exactly the
    eigenvalues lams: z_hat_i^2 = prod_j (lam_j - sigma_i) / prod_{j != i} (sigma_j - sigma_i).
    """
    num = lams[None, :] - sigma[:, None]
    den = sigma[None, :] - sigma[:, None]
    np.fill_diagonal(den, 1.0)
    ratio = np.abs(np.prod(num, axis=1) / np.prod(den, axis=1))
    return np.sign(z) * np.sqrt(ratio)


def _assert_interlacing(
    sigma: NDArray[np.float64], z: NDArray[np.float64], lams: NDArray[np.float64]
) -> None:
    norm_sq = float(z @ z)
    slack = settings.SECULAR_TOL * max(1.0, float(np.max(np.abs(sigma))) + norm_sq) * 10
    upper = np.append(sigma[1:], sigma[-1] + norm_sq)
    if np.any(lams < sigma - slack) or np.any(lams > upper + slack):
        raise EigenSolverError(sigma.shape[0], float(np.max(np.maximum(sigma - lams, lams - upper))))
    trace_gap = abs(float(lams.sum() - sigma.sum() - norm_sq))
    if trace_gap > 1e-9 * max(1.0, abs(float(sigma.sum())) + norm_sq):
        raise EigenSolverError(sigma.shape[0], trace_gap)


class IsotropicService(BaseService):
    """
    Fast isotropic sparsification and its audit against the generic selector
    """

    def isotropic_sparsify(
        self, family: RowFamily, epsilon: float, t: int | None = None, certify: bool = True
    ) -> SparseIsotropicResult:
        """
        Select rows so that |sum_i s_i row_i row_i^T - I| <= epsilon.

        With t given the greedy runs exactly t steps. Otherwise it stops at the
        first step whose residual is <= epsilon, within the budget
        ceil(c n ln n / eps^2); c starts at ISOTROPIC_C0 and doubles when the
        budget is exhausted.
        """
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        if t is not None:
            if t < 1:
                raise DomainError(f"t must be positive, got {t}")
            return self._greedy(family, epsilon, t, None, stop_early=False, certify=certify)

        result = None
        retrying = Retrying(
            stop=stop_after_attempt(1 + self.settings.MAX_DOUBLINGS),
            retry=retry_if_exception_type(CertificationError),
            reraise=True,
        )
        for attempt in retrying:
            with attempt:
                c = self.settings.ISOTROPIC_C0 * 2 ** (attempt.retry_state.attempt_number - 1)
                if attempt.retry_state.attempt_number > 1:
                    logger.warning(f"Residual above target, doubling the step constant to c={c:g}")
                budget = self.step_budget(family.n, epsilon, c)
                result = self._greedy(family, epsilon, budget, c, stop_early=True, certify=certify)
        return result

    @staticmethod
    def step_budget(n: int, epsilon: float, c: float) -> int:
        return max(n, math.ceil(c * n * math.log(max(n, 2)) / epsilon**2))

    def candidate_log_potentials(
        self, lams: NDArray[np.float64], z: NDArray[np.float64], theta: float, step: int
    ) -> NDArray[np.float64]:
        """log(2 tr cosh(theta (Lambda + z_k z_k^T - step I))) for every row z_k."""

        def block(rows: slice) -> NDArray[np.float64]:
            shifted = theta * (secular_eigs_batch(lams, z[rows]) - step)
            return logsumexp(np.concatenate([shifted, -shifted], axis=1), axis=1)

        return map_chunks(block, z.shape[0], self.threads)

    def _greedy(
        self,
        family: RowFamily,
        epsilon: float,
        t: int,
        c: float | None,
        stop_early: bool,
        certify: bool,
    ) -> SparseIsotropicResult:
        n = family.n
        theta = epsilon / (2 * n)
        scaled = family.scaled_rows()
        lams = np.zeros(n)
        basis = np.eye(n)
        z = scaled.copy()
        running = np.zeros((n, n))
        chosen: list[int] = []
        trace = [math.log(2 * n)]
        logger.info(f"Isotropic sparsification: m={family.m}, n={n}, budget {t}, theta={theta:.6g}")

        for step in range(1, t + 1):
            log_potentials = self.candidate_log_potentials(lams, z, theta, step)
            k = argmin_smallest_index(log_potentials, self.settings.TIE_LOG_TOL)
            chosen.append(k)
            trace.append(float(log_potentials[k]))

            lams, rotation = secular_eigs(DiagonalPlusRankOne(sigma=lams, z=z[k]), vectors=True)
            z = z @ rotation
            basis = basis @ rotation
            running += np.outer(scaled[k], scaled[k])
            logger.debug(f"step {step}/{t}: row {k + 1}, log-potential {log_potentials[k]:.6f}")

            if step % BASIS_CHECK_EVERY == 0:
                self._check_basis(basis, lams, running)
                z = scaled @ basis

            if stop_early and float(np.max(np.abs(lams / step - 1.0))) <= epsilon:
                logger.info(f"Residual target reached after {step} steps")
                break

        indices = np.asarray(chosen, dtype=np.int64)
        steps = indices.shape[0]
        scalars = 1.0 / (steps * family.p[indices])
        residual = self.residual(family, indices, scalars)
        logger.info(f"Selected {steps} rows, certified residual {residual:.6g}")
        if certify and residual > epsilon:
            raise CertificationError("residual", residual, epsilon)
        return SparseIsotropicResult(
            indices=indices,
            scalars=scalars,
            residual=residual,
            epsilon=epsilon,
            theta=theta,
            budget=t,
            c=c,
            potential_trace=np.asarray(trace),
        )

    @staticmethod
    def _check_basis(basis: NDArray[np.float64], lams: NDArray[np.float64], running: NDArray[np.float64]):
        rebuilt = (basis * lams) @ basis.T
        gap = float(np.max(np.abs(rebuilt - running)))
        if gap > BASIS_CHECK_TOL * max(1.0, float(np.max(np.abs(lams)))):
            raise EigenSolverError(basis.shape[0], gap)

    @staticmethod
    def residual(family: RowFamily, indices: NDArray[np.int64], scalars: NDArray[np.float64]) -> float:
        """|sum_i s_i row_i row_i^T - I| by direct eigensolve."""
        rows = family.rows[indices]
        total = (rows * scalars[:, None]).T @ rows
        total = 0.5 * (total + total.T)
        return float(np.max(np.abs(sym_eigvals(total - np.eye(family.n)))))

    def equivalence_audit(self, family: RowFamily, epsilon: float, t_small: int) -> bool:
        """
        Run the fast path and the generic selector on f(k) = z_k z_k^T - I for
        t_small steps and compare the index sequences.
        """
        work = float(family.m) * family.n**3 * t_small
        if work > self.settings.AUDIT_WORK_LIMIT:
            raise GuardExceededError(
                f"Generic audit needs {work:.3g} operations (limit {self.settings.AUDIT_WORK_LIMIT:.3g})"
            )
        fast = self.isotropic_sparsify(family, epsilon, t=t_small, certify=False)
        generic = HypercosineService(self.settings, self.threads).select_indices(
            IsotropicFamily(family), epsilon / 2, t_small, certify=False
        )
        same = bool(np.array_equal(fast.indices, generic.indices))
        if not same:
            first = int(np.flatnonzero(fast.indices != generic.indices)[0])
            logger.warning(
                f"Fast and generic selections differ at step {first + 1}: "
                f"{fast.indices[first] + 1} vs {generic.indices[first] + 1}"
            )
        return same
