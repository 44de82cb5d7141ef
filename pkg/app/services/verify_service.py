"""
Randomized checks of the closed-form matrix identities the potentials rely on.
"""

import math
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from scipy.linalg import circulant, expm

from app.core.linalg import (
    dilation,
    matrix_function,
    operator_norm,
    rank_one_exp,
    sym_matrix,
    taylor_exp,
    trace_cosh,
)

from .base_service import BaseService

IDENTITY_TOL = 1e-10


@dataclass
class IdentityCheck:
    name: str
    trials: int
    # largest violation over the trials, relative where the identity is scale-free
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def _random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> NDArray[np.float64]:
    g = rng.standard_normal((n, n))
    return sym_matrix(scale * (g + g.T) / 2, symmetrize=True)


class VerifyService(BaseService):
    """
    Identity suites for rank-one exponentials, dilations, projectors,
    Golden-Thompson, Tsuda monotonicity and Taylor truncation
    """

    def rank_one_exp(self, trials: int, rng: np.random.Generator) -> IdentityCheck:
        worst = 0.0
        for _ in range(trials):
            x = rng.standard_normal(int(rng.integers(1, 8)))
            for sign in (1, -1):
                closed = rank_one_exp(x, sign)
                direct = expm(sign * np.outer(x, x))
                worst = max(worst, float(np.max(np.abs(closed - direct))) / max(1.0, operator_norm(direct)))
        return IdentityCheck("rank_one_exp", trials, worst, IDENTITY_TOL)

    def dilation_trace(self, trials: int, rng: np.random.Generator) -> IdentityCheck:
        """tr exp(D(A)) = 2 tr cosh(A)"""
        worst = 0.0
        for _ in range(trials):
            a = _random_symmetric(rng, int(rng.integers(1, 8)))
            lhs = float(np.trace(expm(dilation(a))))
            rhs = 2 * trace_cosh(a)
            worst = max(worst, abs(lhs - rhs) / rhs)
        return IdentityCheck("dilation_trace", trials, worst, IDENTITY_TOL)

    def projector_cosh(self, trials: int, rng: np.random.Generator) -> IdentityCheck:
        """cosh(PA) = P cosh(A) + I - P for P = J/n and circulant (hence commuting) A."""
        worst = 0.0
        for _ in range(trials):
            n = int(rng.integers(2, 9))
            c = rng.standard_normal(n)
            # symmetric circulant: c_k = c_{n-k}
            c = (c + np.roll(c[::-1], 1)) / 2
            a = sym_matrix(circulant(c), symmetrize=True)
            p = np.full((n, n), 1.0 / n)
            lhs = matrix_function(sym_matrix(p @ a, symmetrize=True), np.cosh)
            rhs = p @ matrix_function(a, np.cosh) + np.eye(n) - p
            worst = max(worst, float(np.max(np.abs(lhs - rhs))) / max(1.0, operator_norm(lhs)))
        return IdentityCheck("projector_cosh", trials, worst, IDENTITY_TOL)

    def golden_thompson(self, trials: int, rng: np.random.Generator) -> IdentityCheck:
        """tr exp(A + B) <= tr(exp(A) exp(B)); the violation is the positive excess."""
        worst = 0.0
        for _ in range(trials):
            n = int(rng.integers(1, 7))
            a, b = _random_symmetric(rng, n), _random_symmetric(rng, n)
            lhs = float(np.trace(expm(a + b)))
            rhs = float(np.trace(expm(a) @ expm(b)))
            worst = max(worst, (lhs - rhs) / max(1.0, rhs))
        return IdentityCheck("golden_thompson", trials, worst, IDENTITY_TOL)

    def tsuda(self, trials: int, rng: np.random.Generator) -> IdentityCheck:
        """A >= 0 and B <= C imply tr(AB) <= tr(AC)."""
        worst = 0.0
        for _ in range(trials):
            n = int(rng.integers(1, 7))
            g = rng.standard_normal((n, n))
            a = g @ g.T
            b = _random_symmetric(rng, n)
            h = rng.standard_normal((n, n))
            c = b + h @ h.T
            lhs = float(np.trace(a @ b))
            rhs = float(np.trace(a @ c))
            worst = max(worst, (lhs - rhs) / max(1.0, abs(rhs)))
        return IdentityCheck("tsuda", trials, worst, IDENTITY_TOL)

    def taylor_truncation(self, trials: int, rng: np.random.Generator) -> IdentityCheck:
        """||exp(B) - T_l(B)|| <= |B|^(l+1) / (l+1)! e^|B| for l >= |B|."""
        worst = 0.0
        for _ in range(trials):
            n = int(rng.integers(1, 7))
            b = _random_symmetric(rng, n, scale=float(rng.uniform(0.1, 2.0)))
            norm = operator_norm(b)
            order = max(1, math.ceil(norm)) + int(rng.integers(0, 6))
            gap = operator_norm(expm(b) - taylor_exp(b, order))
            ceiling = norm ** (order + 1) / math.factorial(order + 1) * math.exp(norm)
            worst = max(worst, gap - ceiling)
        return IdentityCheck("taylor_truncation", trials, worst, IDENTITY_TOL)

    def run_identities(self, trials: int = 100, seed: int = 0) -> list[IdentityCheck]:
        rng = np.random.default_rng(seed)
        checks = [
            self.rank_one_exp(trials, rng),
            self.dilation_trace(trials, rng),
            self.projector_cosh(trials, rng),
            self.golden_thompson(trials, rng),
            self.tsuda(trials, rng),
            self.taylor_truncation(trials, rng),
        ]
        for check in checks:
            log = logger.info if check.passed else logger.warning
            log(f"{check.name}: {check.trials} trials, max violation {check.max_violation:.3e}")
        return checks
