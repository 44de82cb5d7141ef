from abc import ABC, abstractmethod
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.exceptions import (
    DimensionMismatchError,
    DomainError,
    NormBoundError,
    OracleError,
)
from app.core.linalg import SymMatrix, sym_matrix


class SampleFamily(ABC):
    """
    Indexed family of symmetric n x n matrices f_j(k), k in [m].

    `weights` is the distribution of the random index X_j under which every
    f_j has zero mean; it is only used for validation and baselines.
    `steps` is None for stationary families (the same f at every step).
    """

    m: int
    n: int
    gamma: float
    rho_sq: float
    steps: int | None = None

    @property
    @abstractmethod
    def weights(self) -> NDArray[np.float64]: ...

    @abstractmethod
    def evaluate(self, step: int, index: int) -> SymMatrix: ...

    @property
    def stationary(self) -> bool:
        return self.steps is None

    def candidates(self, step: int) -> NDArray[np.float64]:
        """All m candidate matrices of one step stacked as an (m, n, n) array."""
        if self.stationary:
            return self._stationary_candidates
        return self._enumerate(step)

    @cached_property
    def _stationary_candidates(self) -> NDArray[np.float64]:
        stack = self._enumerate(0)
        stack.setflags(write=False)
        return stack

    def _enumerate(self, step: int) -> NDArray[np.float64]:
        stack = np.empty((self.m, self.n, self.n))
        for k in range(self.m):
            try:
                stack[k] = self.evaluate(step, k)
            except Exception as exc:
                raise OracleError(step, k, str(exc)) from exc
        return stack


def uniform_weights(m: int) -> NDArray[np.float64]:
    return np.full(m, 1.0 / m)


class DenseFamily(SampleFamily):
    """
    Stationary family given by an explicit stack of candidate matrices.
    gamma and rho_sq default to the exact values computed from the stack.
    """

    def __init__(
        self,
        matrices: ArrayLike,
        weights: ArrayLike | None = None,
        gamma: float | None = None,
        rho_sq: float | None = None,
    ):
        stack = np.array(matrices, dtype=np.float64)
        if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
            raise DimensionMismatchError(f"Expected an (m, n, n) stack, got shape {stack.shape}")
        for k in range(stack.shape[0]):
            sym_matrix(stack[k])
        stack.setflags(write=False)
        self._stack = stack
        self.m, self.n = stack.shape[0], stack.shape[1]
        self._weights = _probability_vector(weights, self.m)
        self.gamma = gamma if gamma is not None else _max_norm(stack)
        self.rho_sq = rho_sq if rho_sq is not None else _variance_norm(stack, self._weights)
        if self.gamma <= 0 or self.rho_sq <= 0:
            raise DomainError("gamma and rho_sq must be positive; use explicit bounds for a zero family")

    @property
    def weights(self) -> NDArray[np.float64]:
        return self._weights

    def evaluate(self, step: int, index: int) -> SymMatrix:
        return self._stack[index]

    def candidates(self, step: int) -> NDArray[np.float64]:
        return self._stack


class BalancingFamily(SampleFamily):
    """
    The matrix balancing game: at step j the two candidates are +M_j (index 0)
    and -M_j (index 1), each with probability 1/2.
    """

    def __init__(self, matrices: list[ArrayLike], norm_slack: float = 1e-9):
        if not matrices:
            raise DomainError("At least one matrix is required")
        stack = np.stack([sym_matrix(m) for m in matrices])
        for j in range(stack.shape[0]):
            norm = float(np.max(np.abs(np.linalg.eigvalsh(stack[j]))))
            if norm > 1.0 + norm_slack:
                raise NormBoundError(j, norm, 1.0)
        stack.setflags(write=False)
        self._stack = stack
        self.m = 2
        self.n = stack.shape[1]
        self.steps = stack.shape[0]
        self.gamma = 1.0
        self.rho_sq = 1.0

    @property
    def weights(self) -> NDArray[np.float64]:
        return uniform_weights(2)

    def evaluate(self, step: int, index: int) -> SymMatrix:
        return self._stack[step] if index == 0 else -self._stack[step]

    def candidates(self, step: int) -> NDArray[np.float64]:
        return np.stack([self._stack[step], -self._stack[step]])

    @staticmethod
    def signs(indices: NDArray[np.int64]) -> NDArray[np.int64]:
        return np.where(np.asarray(indices) == 0, 1, -1)


def _probability_vector(weights: ArrayLike | None, m: int) -> NDArray[np.float64]:
    if weights is None:
        return uniform_weights(m)
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape[0] != m:
        raise DimensionMismatchError(f"Expected {m} weights, got {w.shape[0]}")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
        raise DomainError("weights must be a probability vector")
    w = w.copy()
    w.setflags(write=False)
    return w


def _max_norm(stack: NDArray[np.float64]) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(stack))))


def _variance_norm(stack: NDArray[np.float64], weights: NDArray[np.float64]) -> float:
    second_moment = np.einsum("k,kij,kjl->il", weights, stack, stack)
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (second_moment + second_moment.T)))))
