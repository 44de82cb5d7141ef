from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.exceptions import DimensionMismatchError, DomainError
from app.core.linalg import SymMatrix, dilation
from app.models.family import SampleFamily


@dataclass(frozen=True)
class SddDecomposition:
    """
    A = C C^T + diag(A) - diag(R) where C has one column per non-zero
    off-diagonal pair i < j:
        C^(i,j) = sqrt|A_ij| e_i + sign(A_ij) sqrt|A_ij| e_j
    and R_i = sum_{j != i} |A_ij|.
    """

    n: int
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    values: NDArray[np.float64]
    diag: NDArray[np.float64]
    r: NDArray[np.float64]

    @classmethod
    def from_matrix(cls, a: SymMatrix) -> "SddDecomposition":
        n = a.shape[0]
        rows, cols = np.triu_indices(n, k=1)
        values = a[rows, cols]
        keep = values != 0
        r = np.abs(a).sum(axis=1) - np.abs(np.diag(a))
        return cls(
            n=n,
            rows=rows[keep].astype(np.int64),
            cols=cols[keep].astype(np.int64),
            values=values[keep].copy(),
            diag=np.diag(a).copy(),
            r=r,
        )

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def pairs(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(v)) for i, j, v in zip(self.rows, self.cols, self.values)]

    def column_vectors(self) -> NDArray[np.float64]:
        """The columns of C as the rows of a (pairs, n) array."""
        root = np.sqrt(np.abs(self.values))
        c = np.zeros((self.size, self.n))
        c[np.arange(self.size), self.rows] = root
        c[np.arange(self.size), self.cols] = np.sign(self.values) * root
        return c

    def assemble(self, column_weights: ArrayLike | None = None) -> NDArray[np.float64]:
        """
        sum_l w_l C^l (C^l)^T + diag(A) - diag(R), written entry by entry so
        integer inputs reconstruct without rounding.
        """
        if column_weights is None:
            column_weights = np.ones(self.size)
        w = np.asarray(column_weights, dtype=np.float64)
        if w.shape != (self.size,):
            raise DimensionMismatchError(f"Expected {self.size} column weights, got shape {w.shape}")
        if np.any(w < 0):
            raise DomainError("Column weights must be non-negative")
        out = np.diag(self.diag - self.r)
        magnitude = w * np.abs(self.values)
        np.add.at(out, (self.rows, self.rows), magnitude)
        np.add.at(out, (self.cols, self.cols), magnitude)
        np.add.at(out, (self.rows, self.cols), w * self.values)
        np.add.at(out, (self.cols, self.rows), w * self.values)
        return out

    def reconstruct(self) -> NDArray[np.float64]:
        return self.assemble()


@dataclass(frozen=True)
class SparsifiedMatrix:
    """Coordinate storage of A~ (0-based, row-major order) with its certificate."""

    n: int
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    values: NDArray[np.float64]
    budget: int
    # ||A - A~|| by direct eigensolve; None when certification was skipped
    error: float | None
    # ||A|| (or the supplied estimate) the run was normalized by
    scale: float
    theta: float
    t: int
    symmetric: bool = True
    # ||A|| by direct eigensolve, set together with `error`
    norm: float | None = None

    @classmethod
    def from_dense(cls, approx: ArrayLike, **fields) -> "SparsifiedMatrix":
        a = np.asarray(approx, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return cls(
            n=int(a.shape[0]),
            rows=rows.astype(np.int64),
            cols=cols.astype(np.int64),
            values=a[rows, cols],
            **fields,
        )

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def relative_error(self) -> float | None:
        if self.error is None or not self.norm:
            return None
        return self.error / self.norm

    def dense(self) -> NDArray[np.float64]:
        out = np.zeros((self.n, self.n))
        out[self.rows, self.cols] = self.values
        return out

    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(v)) for i, j, v in zip(self.rows, self.cols, self.values)]


class EntryDilationFamily(SampleFamily):
    """
    h(l) = D(A_l / p_l * E_l - A) over the non-zero entries l of A, with
    p_l = A_l^2 / ||A||_F^2 and entries numbered row-major
    (l -> (ceil(l / n), (l - 1) mod n + 1) in 1-based terms).
    The dilation makes every h(l) a symmetric 2n x 2n matrix.
    """

    def __init__(self, a: ArrayLike, gamma: float, rho_sq: float):
        a = np.array(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"Expected a square matrix, got shape {a.shape}")
        size = a.shape[0]
        self.entries = np.flatnonzero(a.ravel())
        if self.entries.size == 0:
            raise DomainError("Matrix has no non-zero entries")
        self.a = a
        self.size = size
        self.row, self.col = np.divmod(self.entries, size)
        frobenius_sq = float(np.sum(a * a))
        picked = a[self.row, self.col]
        self.coefficients = frobenius_sq / picked
        self._weights = picked**2 / frobenius_sq
        self.m = int(self.entries.size)
        self.n = 2 * size
        self.gamma = gamma
        self.rho_sq = rho_sq

    @property
    def weights(self) -> NDArray[np.float64]:
        return self._weights

    def evaluate(self, step: int, index: int) -> SymMatrix:
        x = -self.a.copy()
        x[self.row[index], self.col[index]] += self.coefficients[index]
        return dilation(x)

    def _enumerate(self, step: int) -> NDArray[np.float64]:
        size = self.size
        stack = np.zeros((self.m, 2 * size, 2 * size))
        stack[:, :size, size:] = -self.a
        stack[:, size:, :size] = -self.a.T
        k = np.arange(self.m)
        stack[k, self.row, size + self.col] += self.coefficients
        stack[k, size + self.col, self.row] += self.coefficients
        return stack


def square_matrix(data: ArrayLike) -> NDArray[np.float64]:
    """A finite, non-empty square matrix; symmetry is not required."""
    a = np.array(data, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatchError(f"Expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("Matrix has non-finite entries")
    return a