from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.exceptions import DimensionMismatchError, DomainError
from app.core.linalg import SymMatrix, sym_eigvals, sym_matrix

PSD_SLACK = 1e-9


@dataclass(frozen=True)
class OuterProductSum:
    """A = sum_i v_i v_i^T with the vectors v_i stored as the rows of `vectors`."""

    vectors: NDArray[np.float64]
    a: SymMatrix

    @property
    def m(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def n(self) -> int:
        return int(self.vectors.shape[1])

    @classmethod
    def from_vectors(cls, vectors: ArrayLike) -> "OuterProductSum":
        v = np.array(vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionMismatchError(f"Expected an m x n array of vectors, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("Vectors have non-finite entries")
        v.setflags(write=False)
        return cls(vectors=v, a=sym_matrix(v.T @ v, symmetrize=True))

    def check(self) -> None:
        """psd within slack and consistent with the vectors."""
        lams = sym_eigvals(self.a)
        scale = max(1.0, float(np.max(np.abs(lams))))
        if lams[-1] < -PSD_SLACK * scale:
            raise DomainError(f"A is not positive semi-definite (lambda_min = {lams[-1]:.3e})")
        gap = float(np.max(np.abs(self.vectors.T @ self.vectors - self.a)))
        if gap > 1e-8 * scale:
            raise DomainError(f"A differs from sum v_i v_i^T by {gap:.3e}")

    def reweighted(self, weights: ArrayLike) -> SymMatrix:
        s = np.asarray(weights, dtype=np.float64)
        return sym_matrix((self.vectors * s[:, None]).T @ self.vectors, symmetrize=True)


@dataclass(frozen=True)
class WeightVector:
    s: NDArray[np.float64]

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.s))

    @property
    def support(self) -> NDArray[np.int64]:
        return np.flatnonzero(self.s)
