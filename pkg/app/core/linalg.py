"""
Dense symmetric linear algebra kernels.

Every matrix is a dense float64 numpy array. Symmetric inputs are checked for
exact symmetry on construction; results of floating point products are
symmetrized explicitly before they are handed back.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from app.core.config import settings
from app.core.exceptions import (
    DimensionMismatchError,
    DomainError,
    EigenSolverError,
    NotSymmetricError,
    PotentialOverflowError,
)

SymMatrix = NDArray[np.float64]


@dataclass(frozen=True)
class EigDecomposition:
    """Eigenvalues in descending order; column j of `eigenvectors` pairs with eigenvalue j."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> SymMatrix:
        q = self.eigenvectors
        return sym_matrix((q * self.eigenvalues) @ q.T, symmetrize=True)


def sym_matrix(data: ArrayLike, *, symmetrize: bool = False) -> SymMatrix:
    """
    Build a read-only symmetric matrix. Exact symmetry is required unless
    `symmetrize` is set, in which case (A + A^T)/2 is returned.
    """
    a = np.array(data, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatchError(f"Expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("Matrix has non-finite entries")
    if symmetrize:
        a = 0.5 * (a + a.T)
    elif not np.array_equal(a, a.T):
        i, j = np.unravel_index(np.argmax(np.abs(a - a.T)), a.shape)
        raise NotSymmetricError(f"Entry ({i}, {j}) = {a[i, j]!r} differs from ({j}, {i}) = {a[j, i]!r}")
    a.setflags(write=False)
    return a


def eig_tolerance(eigenvalues: NDArray[np.float64]) -> float:
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return settings.EIG_TOL * max(1.0, scale)


def sym_eigvals(a: SymMatrix) -> NDArray[np.float64]:
    """Eigenvalues only, descending."""
    try:
        lams = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(a.shape[0], float("nan")) from exc
    return lams[::-1]


def sym_eig(a: SymMatrix) -> EigDecomposition:
    try:
        lams, q = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(a.shape[0], float("nan")) from exc
    residual = float(np.max(np.abs(a @ q - q * lams))) if a.size else 0.0
    if not residual <= eig_tolerance(lams):
        raise EigenSolverError(a.shape[0], residual)
    lams = lams[::-1].copy()
    q = q[:, ::-1].copy()
    lams.setflags(write=False)
    q.setflags(write=False)
    return EigDecomposition(eigenvalues=lams, eigenvectors=q)


def matrix_function(a: SymMatrix, fn) -> SymMatrix:
    decomposition = sym_eig(a)
    q = decomposition.eigenvectors
    return sym_matrix((q * fn(decomposition.eigenvalues)) @ q.T, symmetrize=True)


def matrix_exp(a: SymMatrix) -> SymMatrix:
    return matrix_function(a, np.exp)


def rank_one_exp(x: ArrayLike, sign: int = 1) -> SymMatrix:
    """
    exp(sign * x x^T) in closed form:
    I + (e^{|x|^2} - 1)/|x|^2 x x^T, or I - (1 - e^{-|x|^2})/|x|^2 x x^T.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    norm_sq = float(x @ x)
    if norm_sq == 0.0:
        raise DomainError("rank_one_exp needs a non-zero vector")
    if sign == 1:
        coeff = math.expm1(norm_sq) / norm_sq
    else:
        coeff = math.expm1(-norm_sq) / norm_sq
    return sym_matrix(np.eye(x.shape[0]) + coeff * np.outer(x, x), symmetrize=True)


def log_potential(eigenvalues: NDArray[np.float64]) -> float:
    """log(2 tr cosh(W)) = log sum_j (e^{l_j} + e^{-l_j}), overflow free."""
    return float(logsumexp(np.concatenate([eigenvalues, -eigenvalues])))


def trace_cosh_from_eigenvalues(eigenvalues: NDArray[np.float64]) -> float:
    peak = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    if peak > settings.EXP_OVERFLOW_LIMIT:
        raise PotentialOverflowError(peak)
    return float(np.sum(np.cosh(eigenvalues)))


def trace_cosh(a: SymMatrix) -> float:
    return trace_cosh_from_eigenvalues(sym_eigvals(a))


def log_trace_cosh(a: SymMatrix) -> float:
    """log tr cosh(A); the comparison-only form of trace_cosh."""
    return log_potential(sym_eigvals(a)) - math.log(2.0)


def dilation(a: ArrayLike) -> SymMatrix:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    m, n = a.shape
    d = np.zeros((m + n, m + n))
    d[:m, m:] = a
    d[m:, :m] = a.T
    return sym_matrix(d)


def operator_norm(a: ArrayLike) -> float:
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return 0.0
    if a.ndim == 1:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a, 2))


def sym_norm(a: SymMatrix) -> float:
    """Operator norm of a symmetric matrix via its spectrum."""
    return float(np.max(np.abs(sym_eigvals(a))))


def psd_leq(a: SymMatrix, b: SymMatrix, slack: float = 0.0) -> bool:
    """A <= B in the Loewner order, up to `slack`."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Cannot compare {a.shape} with {b.shape}")
    if slack < 0:
        raise DomainError("slack must be non-negative")
    return bool(sym_eigvals(sym_matrix(b - a, symmetrize=True))[-1] >= -slack)


def taylor_exp(b: NDArray[np.float64], order: int) -> NDArray[np.float64]:
    """Truncated Taylor polynomial sum_{k<=order} B^k / k!."""
    n = b.shape[0]
    total = np.eye(n)
    term = np.eye(n)
    for k in range(1, order + 1):
        term = term @ b / k
        total = total + term
    return total


def psd_sqrt(a: SymMatrix) -> SymMatrix:
    return matrix_function(a, lambda lams: np.sqrt(np.clip(lams, 0.0, None)))
