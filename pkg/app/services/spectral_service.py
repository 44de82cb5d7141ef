"""
Spectral sparsification of sums of outer products.

Pipeline: whiten the vectors to isotropic position on the range of A, pick a
reweighted subset with the isotropic greedy, re-whiten that subset and cut it
down to ceil(n/eps^2) vectors with the two-barrier method. The stages compose to
(1 - eps)^3 A <= A~ <= (1 + eps)^3 A.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray

from app.core.exceptions import (
    BarrierInfeasibleError,
    CertificationError,
    DimensionMismatchError,
    DomainError,
    GuardExceededError,
    RankCollapseError,
)
from app.core.linalg import SymMatrix, psd_leq, sym_eig, sym_matrix
from app.core.parallel import map_chunks
from app.models.outer import PSD_SLACK, OuterProductSum, WeightVector
from app.models.rows import RowFamily

from .base_service import BaseService
from .isotropic_service import IsotropicService

CUT_ENUMERATION_MAX_N = 16
SANDWICH_SLACK = 1e-8
BARRIER_SLACK = 1e-12


@dataclass
class RangeWhitening:
    """A^{-1/2} restricted to the range of A, with the range basis and eigenvalues."""

    inverse_sqrt: SymMatrix
    basis: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]

    @property
    def rank(self) -> int:
        return int(self.eigenvalues.shape[0])


@dataclass
class SpectralResult:
    weights: WeightVector
    epsilon: float
    rank: int
    budget: int
    isotropic_t: int
    # extreme eigenvalues of A^{-1/2} A~ A^{-1/2} on the range of A
    low: float
    high: float
    lower_ok: bool
    upper_ok: bool

    @property
    def certified(self) -> bool:
        return self.lower_ok and self.upper_ok


Edge = tuple[int, int, float]


class SpectralService(BaseService):
    """
    Isotropic + barrier spectral sparsifier and the graph Laplacian driver
    """

    def inverse_sqrt(self, a: SymMatrix, rank_tol: float | None = None) -> RangeWhitening:
        """
        Pseudo-inverse square root: eigenvalues below rank_tol * lambda_max are
        treated as null directions.
        """
        rank_tol = self.settings.RANK_TOL if rank_tol is None else rank_tol
        decomposition = sym_eig(a)
        lams = decomposition.eigenvalues
        top = float(lams[0]) if lams.size else 0.0
        if lams[-1] < -PSD_SLACK * max(1.0, abs(top)):
            raise DomainError(f"Matrix has a negative eigenvalue {lams[-1]:.3e}")
        keep = lams > rank_tol * top if top > 0 else np.zeros_like(lams, dtype=bool)
        if np.count_nonzero(~keep) and top > 0:
            logger.warning(f"Projecting out {np.count_nonzero(~keep)} null directions")
        basis = decomposition.eigenvectors[:, keep]
        kept = lams[keep]
        root = sym_matrix((basis / np.sqrt(kept)) @ basis.T, symmetrize=True)
        return RangeWhitening(inverse_sqrt=root, basis=basis, eigenvalues=kept)

    def spectral_sparsify(
        self, ops: OuterProductSum, epsilon: float, certify: bool = True
    ) -> SpectralResult:
        """
        Weights s with at most ceil(n_eff / eps^2) non-zeros such that
        (1 - eps)^3 A <= sum_i s_i v_i v_i^T <= (1 + eps)^3 A.
        """
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        ops.check()
        whitening = self.inverse_sqrt(ops.a)
        rank = whitening.rank
        if rank == 0:
            raise RankCollapseError("A has no range above the rank tolerance")

        # u_i = Lambda^{-1/2} V^T v_i, isotropic in R^rank
        u = (ops.vectors @ whitening.basis) / np.sqrt(whitening.eigenvalues)
        if np.count_nonzero(np.einsum("ij,ij->i", u, u) > 0) < rank:
            raise DimensionMismatchError(f"Need at least {rank} vectors outside the null space")
        family = RowFamily.from_rows(u, isotropy_tol=1e-6)
        budget = math.ceil(rank / epsilon**2)
        logger.info(f"Spectral sparsification: m={ops.m}, n={ops.n}, rank {rank}, budget {budget}")

        if family.m <= budget:
            tau = np.ones(family.m)
            isotropic_t = 0
        else:
            iso = IsotropicService(self.settings, self.threads).isotropic_sparsify(family, epsilon)
            tau = iso.weights(family.m)
            isotropic_t = iso.t

        support = np.flatnonzero(tau)
        rows = family.rows[support]
        b = (rows * tau[support, None]).T @ rows
        b_whitening = self.inverse_sqrt(sym_matrix(b, symmetrize=True))
        if b_whitening.rank < rank:
            raise RankCollapseError("Isotropic stage lost a direction of the range")
        w = (rows * np.sqrt(tau[support])[:, None]) @ b_whitening.inverse_sqrt
        reduced = self.bss_reweight(w, epsilon, certify=certify)

        s = np.zeros(ops.m)
        s[family.source_index[support]] = reduced.s * tau[support]
        weights = WeightVector(s=s)

        lower_ok, upper_ok = self.sandwich(ops, weights, (1 - epsilon) ** 3, (1 + epsilon) ** 3)
        low, high = self.relative_spectrum(ops, weights, whitening)
        result = SpectralResult(
            weights=weights,
            epsilon=epsilon,
            rank=rank,
            budget=budget,
            isotropic_t=isotropic_t,
            low=low,
            high=high,
            lower_ok=lower_ok,
            upper_ok=upper_ok,
        )
        logger.info(f"Support {weights.support_size} (budget {budget}), certified {result.certified}")
        if certify and not result.certified:
            # lower-side failures are reported as a shortfall below the floor
            metric, value, bound = (
                ("relative_min_shortfall", (1 - epsilon) ** 3 - low, 0.0)
                if not lower_ok
                else ("relative_max", high, (1 + epsilon) ** 3)
            )
            raise CertificationError(
                metric,
                value,
                bound,
                f"Spectral sandwich fails: relative spectrum [{low:.17g}, {high:.17g}]",
            )
        if certify and weights.support_size > budget:
            raise CertificationError("support", weights.support_size, budget)
        return result

    @staticmethod
    def relative_spectrum(
        ops: OuterProductSum, weights: WeightVector, whitening: RangeWhitening
    ) -> tuple[float, float]:
        approx = ops.reweighted(weights.s)
        half = whitening.basis / np.sqrt(whitening.eigenvalues)
        reduced = half.T @ approx @ half
        lams = np.linalg.eigvalsh(0.5 * (reduced + reduced.T))
        return float(lams[0]), float(lams[-1])

    @staticmethod
    def sandwich(
        ops: OuterProductSum, weights: WeightVector, low: float, high: float
    ) -> tuple[bool, bool]:
        approx = ops.reweighted(weights.s)
        slack = SANDWICH_SLACK * max(1.0, float(np.max(np.abs(ops.a))) * ops.n)
        return (
            psd_leq(sym_matrix(low * ops.a, symmetrize=True), approx, slack),
            psd_leq(approx, sym_matrix(high * ops.a, symmetrize=True), slack),
        )

    def bss_reweight(self, u: ArrayLike, epsilon: float, certify: bool = True) -> WeightVector:
        """
        Two-barrier reweighting of isotropic vectors (rows of u) down to
        ceil(n / eps^2) non-zero weights with (1-eps)^2 I <= sum s_i u_i u_i^T <= (1+eps)^2 I.

        Each step adds the vector maximizing L(v) - U(v) (smallest index on ties)
        with weight 2 / (U(v) + L(v)) while both barriers move by their fixed shifts.
        """
        u = np.asarray(u, dtype=np.float64)
        if u.ndim != 2:
            raise DimensionMismatchError(f"Expected an m x n array of vectors, got shape {u.shape}")
        m, n = u.shape
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        gram_gap = float(np.max(np.abs(u.T @ u - np.eye(n))))
        if gram_gap > 1e-6:
            raise DomainError(f"Vectors are not in isotropic position (gap {gram_gap:.3e})")

        steps = math.ceil(n / epsilon**2)
        if steps >= m:
            logger.debug(f"Budget {steps} >= {m} vectors, keeping all weights at 1")
            return WeightVector(s=np.ones(m))

        root_d = 1.0 / epsilon
        d = root_d**2
        delta_l = 1.0
        eps_l = 1.0 / root_d
        lower = -n / eps_l
        delta_u = (root_d + 1) / (root_d - 1)
        eps_u = (root_d - 1) / (d + root_d)
        upper = n / eps_u

        usable = np.einsum("ij,ij->i", u, u) > 0
        a = np.zeros((n, n))
        s = np.zeros(m)
        for step in range(steps):
            decomposition = sym_eig(sym_matrix(a, symmetrize=True))
            alphas = decomposition.eigenvalues
            projected = u @ decomposition.eigenvectors
            next_upper = upper + delta_u
            next_lower = lower + delta_l

            phi_upper = np.sum(1.0 / (upper - alphas))
            phi_next_upper = np.sum(1.0 / (next_upper - alphas))
            phi_lower = np.sum(1.0 / (alphas - lower))
            phi_next_lower = np.sum(1.0 / (alphas - next_lower))

            def scores(rows: slice) -> NDArray[np.float64]:
                p2 = projected[rows] ** 2
                gap_u = next_upper - alphas
                gap_l = alphas - next_lower
                up = (p2 / gap_u**2).sum(axis=1) / (phi_upper - phi_next_upper)
                up += (p2 / gap_u).sum(axis=1)
                lo = (p2 / gap_l**2).sum(axis=1) / (phi_next_lower - phi_lower)
                lo -= (p2 / gap_l).sum(axis=1)
                return np.stack([up, lo], axis=1).ravel()

            pairs = map_chunks(scores, m, self.threads).reshape(-1, 2)
            up, lo = pairs[:, 0], pairs[:, 1]
            margin = np.where(usable, lo - up, -np.inf)
            best = float(np.max(margin))
            if best < -BARRIER_SLACK * max(1.0, float(np.max(np.abs(lo[usable])))):
                raise BarrierInfeasibleError(step + 1, best)
            k = int(np.flatnonzero(margin >= best - BARRIER_SLACK * max(1.0, abs(best)))[0])

            weight = 2.0 / (up[k] + lo[k])
            s[k] += weight
            a += weight * np.outer(u[k], u[k])
            upper, lower = next_upper, next_lower

        s *= (1 - epsilon) ** 2 / lower
        weights = WeightVector(s=s)
        if certify:
            self._certify_isotropic(u, weights, epsilon)
        logger.info(f"Barrier reweighting kept {weights.support_size} of {m} vectors")
        return weights

    def _certify_isotropic(self, u: NDArray[np.float64], weights: WeightVector, epsilon: float):
        n = u.shape[1]
        total = sym_matrix((u * weights.s[:, None]).T @ u, symmetrize=True)
        ident = np.eye(n)
        slack = SANDWICH_SLACK
        if not psd_leq(sym_matrix((1 - epsilon) ** 2 * ident), total, slack):
            shortfall = (1 - epsilon) ** 2 - float(np.linalg.eigvalsh(total)[0])
            raise CertificationError("lambda_min_shortfall", shortfall, 0.0)
        if not psd_leq(total, sym_matrix((1 + epsilon) ** 2 * ident), slack):
            top = float(np.linalg.eigvalsh(total)[-1])
            raise CertificationError("lambda_max", top, (1 + epsilon) ** 2)

    @staticmethod
    def laplacian_from_graph(edges: list[Edge], n: int) -> OuterProductSum:
        """Vectors sqrt(w) (e_i - e_j) for 0-based edges (i, j, w)."""
        if n < 1:
            raise DomainError("Graph needs at least one vertex")
        if not edges:
            raise DomainError("Graph has no edges")
        vectors = np.zeros((len(edges), n))
        for k, (i, j, w) in enumerate(edges):
            if i == j:
                raise DomainError(f"Edge {k + 1} is a self-loop on vertex {i + 1}")
            if not (0 <= i < n and 0 <= j < n):
                raise DomainError(f"Edge {k + 1} ({i + 1}, {j + 1}) has a vertex outside [1, {n}]")
            if not w > 0:
                raise DomainError(f"Edge {k + 1} has non-positive weight {w}")
            root = math.sqrt(w)
            vectors[k, min(i, j)] = root
            vectors[k, max(i, j)] = -root
        return OuterProductSum.from_vectors(vectors)

    @staticmethod
    def cut_values(weights: ArrayLike, edges: list[Edge], n: int) -> NDArray[np.float64]:
        """
        Weighted value of every non-trivial cut (T, V \\ T) with vertex 1 outside T,
        enumerated in lexicographic order of the membership of vertices 2..n.
        """
        if n > CUT_ENUMERATION_MAX_N:
            raise GuardExceededError(f"Cut enumeration is limited to n <= {CUT_ENUMERATION_MAX_N}")
        w = np.asarray(weights, dtype=np.float64) * np.array([e[2] for e in edges])
        heads = np.array([e[0] for e in edges], dtype=np.int64)
        tails = np.array([e[1] for e in edges], dtype=np.int64)
        sides = np.array(list(itertools.product([0, 1], repeat=n - 1)), dtype=bool)[1:]
        sides = np.column_stack([np.zeros(sides.shape[0], dtype=bool), sides])
        crossing = sides[:, heads] != sides[:, tails]
        return crossing.astype(np.float64) @ w

    @staticmethod
    def sparsified_edges(edges: list[Edge], weights: WeightVector) -> list[Edge]:
        return [(i, j, w * float(weights.s[k])) for k, (i, j, w) in enumerate(edges) if weights.s[k] > 0]
