from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray

from app.core.exceptions import DimensionMismatchError, DomainError
from app.core.linalg import SymMatrix, sym_matrix
from app.models.family import SampleFamily


@dataclass(frozen=True)
class RowFamily:
    """
    Rows of an m x n matrix in isotropic position (sum_k row_k row_k^T = I_n),
    sampled with p_k = |row_k|^2 / n. Zero rows are dropped on construction;
    `source_index[k]` maps a kept row back to its input position.
    """

    rows: NDArray[np.float64]
    p: NDArray[np.float64]
    source_index: NDArray[np.int64]

    @property
    def m(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n(self) -> int:
        return int(self.rows.shape[1])

    @classmethod
    def from_rows(cls, rows: ArrayLike, isotropy_tol: float = 1e-8) -> "RowFamily":
        a = np.array(rows, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] < 1:
            raise DimensionMismatchError(f"Expected an m x n matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("Rows have non-finite entries")

        norms_sq = np.einsum("ij,ij->i", a, a)
        keep = np.flatnonzero(norms_sq > 0)
        if keep.shape[0] < a.shape[0]:
            logger.warning(f"Dropping {a.shape[0] - keep.shape[0]} zero rows")
        a = a[keep]
        m, n = a.shape
        if m < n:
            raise DimensionMismatchError(f"Need at least n={n} non-zero rows, got {m}")

        gram = a.T @ a
        residual = float(np.max(np.abs(gram - np.eye(n))))
        if residual > isotropy_tol:
            raise DomainError(f"Rows are not in isotropic position: |A^T A - I|_max = {residual:.3e}")

        p = norms_sq[keep] / n
        a.setflags(write=False)
        p.setflags(write=False)
        return cls(rows=a, p=p, source_index=keep.astype(np.int64))

    def scaled_rows(self) -> NDArray[np.float64]:
        """Rows rescaled by 1/sqrt(p_k); each has squared norm n."""
        return self.rows / np.sqrt(self.p)[:, None]


@dataclass(frozen=True)
class DiagonalPlusRankOne:
    """diag(sigma) + z z^T"""

    sigma: NDArray[np.float64]
    z: NDArray[np.float64]

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.float64).ravel()
        z = np.asarray(self.z, dtype=np.float64).ravel()
        if sigma.shape != z.shape or sigma.shape[0] < 1:
            raise DimensionMismatchError(f"sigma {sigma.shape} and z {z.shape} must match")
        if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(z))):
            raise DomainError("sigma and z must be finite")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return int(self.sigma.shape[0])

    def dense(self) -> SymMatrix:
        return sym_matrix(np.diag(self.sigma) + np.outer(self.z, self.z), symmetrize=True)


class IsotropicFamily(SampleFamily):
    """
    f(k) = row_k row_k^T / p_k - I under the distribution p; gamma = rho_sq = n.
    """

    def __init__(self, family: RowFamily):
        self.family = family
        self._scaled = family.scaled_rows()
        self.m = family.m
        self.n = family.n
        self.gamma = float(family.n)
        self.rho_sq = float(family.n)

    @property
    def weights(self) -> NDArray[np.float64]:
        return self.family.p

    def evaluate(self, step: int, index: int) -> SymMatrix:
        z = self._scaled[index]
        return np.outer(z, z) - np.eye(self.n)

    def _enumerate(self, step: int) -> NDArray[np.float64]:
        return np.einsum("ki,kj->kij", self._scaled, self._scaled) - np.eye(self.n)[None, :, :]
