"""
Expanding Cayley graphs by greedy minimization of the even Estrada index.

Every greedy step picks g in G and adds g and g^-1 to the generator multiset S.
The potential after the steps g_1, ..., g_i is 2 tr cosh(theta * sum_j f(g_j)) with
f(g) = (R(g) + R(g^-1))/2 - J/n, which equals
2 (EE_even(A_S, theta/2) + 1 - cosh(theta |S| / 2)).
It is evaluated in R[G] as 2n [cosh(x)]_id for the projected element
x = theta/2 * (1_S - |S| u), u = J/n, so no matrix is built on the greedy path.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from app.core.exceptions import CertificationError, DomainError
from app.core.linalg import sym_eigvals
from app.core.parallel import argmin_smallest_index, map_chunks
from app.models.group import (
    GeneratorMultiset,
    GroupTable,
    adjacency,
    basis_element,
    convolve,
    convolve_batch,
)

from .base_service import BaseService
from .hypercosine_service import theorem_bound

# ||y||_1 <= 1/2 before squaring; 0.5^19/19! is far below double precision
SQUARING_RADIUS = 0.5
TAYLOR_TERMS = 18


@dataclass
class EstradaAuditRecord:
    step: int
    # tr cosh(theta * sum_j f(g_j)) from the group-algebra hot path
    potential: float
    # EE_even(A_S, theta/2) + 1 - cosh(theta |S| / 2)
    estrada_form: float

    @property
    def gap(self) -> float:
        return abs(self.potential - self.estrada_form)


@dataclass
class ExpanderResult:
    generators: GeneratorMultiset
    lam: float
    t: int
    c: float | None
    epsilon: float
    theta: float
    bound: float
    selected: NDArray[np.int64]
    potential_trace: NDArray[np.float64]
    audit: list[EstradaAuditRecord] = field(default_factory=list)


class CayleyService(BaseService):
    """
    Group-algebra evaluation of Estrada indices and the expander greedy
    """

    @staticmethod
    def truncation_order(n: int, size: int, theta: float, delta: float) -> int:
        return math.ceil(max(math.log2(n / delta), 2 * math.e**2 * size * theta))

    def estrada_even(
        self, generators: GeneratorMultiset, theta: float, delta: float, table: GroupTable
    ) -> float:
        """
        sum_k m_2k(theta A)/(2k)! within additive delta, with A = sum_{s in S} R(s).

        Even Taylor terms of exp(theta * 1_S) are accumulated in R[G] and the
        trace is read off as n times the identity coefficient.
        """
        return self._estrada(generators, theta, delta, table, even_only=True)

    def estrada_index(
        self, generators: GeneratorMultiset, theta: float, delta: float, table: GroupTable
    ) -> float:
        """The full Estrada index tr exp(theta A) within additive delta."""
        return self._estrada(generators, theta, delta, table, even_only=False)

    def _estrada(
        self,
        generators: GeneratorMultiset,
        theta: float,
        delta: float,
        table: GroupTable,
        even_only: bool,
    ) -> float:
        if generators.size == 0:
            raise DomainError("Generator multiset must be non-empty")
        if theta <= 0 or delta <= 0:
            raise DomainError("theta and delta must be positive")

        n = table.n
        order = self.truncation_order(n, generators.size, theta, delta)
        step = theta * generators.counts(n)
        term = basis_element(table.identity, n)
        total = term[table.identity]
        for k in range(1, order + 1):
            term = convolve(term, step, table) / k
            if not even_only or k % 2 == 0:
                total += term[table.identity]
        return float(n * total)

    def cosh_sinh(
        self, x: NDArray[np.float64], table: GroupTable, squarings: int
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """
        cosh and sinh in R[G] of every row of the (K, n) stack x, by Taylor
        series on x / 2^squarings followed by the double-angle formulas.
        """
        count, n = x.shape
        y = x / 2.0**squarings
        cosh = np.zeros((count, n))
        cosh[:, table.identity] = 1.0
        sinh = y.copy()
        power = y
        for k in range(2, TAYLOR_TERMS + 1):
            power = convolve_batch(power, y, table.product) / k
            if k % 2 == 0:
                cosh += power
            else:
                sinh += power
        product = table.product
        for _ in range(squarings):
            cosh, sinh = (
                convolve_batch(cosh, cosh, product) + convolve_batch(sinh, sinh, product),
                2.0 * convolve_batch(cosh, sinh, product),
            )
        return cosh, sinh

    @staticmethod
    def squarings_for(norm: float) -> int:
        if norm <= SQUARING_RADIUS:
            return 0
        return math.ceil(math.log2(norm / SQUARING_RADIUS))

    def expander_potential(self, x: NDArray[np.float64], table: GroupTable) -> float:
        """tr cosh(R(x)) = n [cosh x]_id for a single group algebra element."""
        x = np.asarray(x, dtype=np.float64)
        squarings = self.squarings_for(float(np.sum(np.abs(x))))
        cosh, _ = self.cosh_sinh(x[None, :], table, squarings)
        return float(table.n * cosh[0, table.identity])

    def candidate_log_potentials(
        self, x: NDArray[np.float64], table: GroupTable, theta: float
    ) -> NDArray[np.float64]:
        """log(2 tr cosh) of x + theta f(g) for every g in G."""
        n = table.n
        inverse = table.inverse
        # ||x + theta f(g)||_1 <= ||x||_1 + 2 theta for every g
        squarings = self.squarings_for(float(np.sum(np.abs(x))) + 2 * theta)

        def block(rows: slice) -> NDArray[np.float64]:
            gs = np.arange(n)[rows]
            batch = np.repeat((x - theta / n)[None, :], gs.shape[0], axis=0)
            batch[np.arange(gs.shape[0]), gs] += theta / 2
            batch[np.arange(gs.shape[0]), inverse[gs]] += theta / 2
            cosh, _ = self.cosh_sinh(batch, table, squarings)
            return np.log(2.0 * n * cosh[:, table.identity])

        return map_chunks(block, n, self.threads)

    def lambda_of_cayley(self, table: GroupTable, generators: GeneratorMultiset) -> float:
        """
        Second largest absolute eigenvalue of the normalized adjacency (1/|S|) sum_s R(s).
        """
        if generators.size == 0:
            raise DomainError("Generator multiset must be non-empty")
        normalized = adjacency(generators, table) / generators.size
        lams = sym_eigvals(normalized)
        if table.n == 1:
            return 0.0
        return float(np.max(np.abs(lams[1:])))

    def build_expander(
        self,
        table: GroupTable,
        epsilon: float,
        t: int | None = None,
        audit: bool = False,
        certify: bool = True,
    ) -> ExpanderResult:
        """
        Greedy expander: |S| = 2t with t = ceil(c ln n / eps^2), certified by a direct
        eigensolve of the normalized adjacency. Without an explicit t, c starts at
        CAYLEY_C0 and doubles on certification failure.
        """
        if table.n < 2:
            raise DomainError("The group must have at least two elements")
        if not 0 < epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")

        if t is not None:
            return self._greedy(table, epsilon, t, None, audit, certify)

        result = None
        retrying = Retrying(
            stop=stop_after_attempt(1 + self.settings.MAX_DOUBLINGS),
            retry=retry_if_exception_type(CertificationError),
            reraise=True,
        )
        for attempt in retrying:
            with attempt:
                c = self.settings.CAYLEY_C0 * 2 ** (attempt.retry_state.attempt_number - 1)
                if attempt.retry_state.attempt_number > 1:
                    logger.warning(f"Certification failed, doubling the step constant to c={c:g}")
                steps = math.ceil(c * math.log(table.n) / epsilon**2)
                result = self._greedy(table, epsilon, steps, c, audit, certify)
        return result

    def _greedy(
        self,
        table: GroupTable,
        epsilon: float,
        t: int,
        c: float | None,
        audit: bool,
        certify: bool,
    ) -> ExpanderResult:
        n = table.n
        gamma = rho_sq = 2.0
        epsilon_alg = epsilon / 2
        theta = epsilon_alg / gamma
        logger.info(f"Building expander on a group of order {n}: t={t}, theta={theta:.6g}")

        counts = np.zeros(n)
        x = np.zeros(n)
        selected = np.empty(t, dtype=np.int64)
        potential_trace = np.empty(t + 1)
        potential_trace[0] = math.log(2 * n)
        records: list[EstradaAuditRecord] = []

        for step in range(t):
            log_potentials = self.candidate_log_potentials(x, table, theta)
            g = argmin_smallest_index(log_potentials, self.settings.TIE_LOG_TOL)
            selected[step] = g
            potential_trace[step + 1] = log_potentials[g]
            counts[g] += 1
            counts[table.inverse[g]] += 1
            size = 2 * (step + 1)
            x = 0.5 * theta * (counts - size / n)
            logger.debug(f"step {step + 1}/{t}: element {g + 1}, log-potential {log_potentials[g]:.6f}")

            if audit:
                records.append(self._audit_step(step + 1, table, selected[: step + 1], theta, x))

        generators = GeneratorMultiset(
            elements=sorted(int(s) for s in np.repeat(np.arange(n), counts.astype(np.int64)))
        )
        lam = self.lambda_of_cayley(table, generators)
        bound = theorem_bound(gamma, rho_sq, n, epsilon_alg, t)
        logger.info(f"|S|={generators.size}, certified lambda={lam:.6g} (target {epsilon})")
        if certify and lam > epsilon:
            raise CertificationError(
                "lambda",
                lam,
                epsilon,
                f"Cayley graph has lambda = {lam:.17g} > {epsilon:.17g} after {t} steps",
            )
        return ExpanderResult(
            generators=generators,
            lam=lam,
            t=t,
            c=c,
            epsilon=epsilon,
            theta=theta,
            bound=bound,
            selected=selected,
            potential_trace=potential_trace,
            audit=records,
        )

    def _audit_step(
        self,
        step: int,
        table: GroupTable,
        selected: NDArray[np.int64],
        theta: float,
        x: NDArray[np.float64],
    ) -> EstradaAuditRecord:
        generators = GeneratorMultiset(
            elements=[int(e) for g in selected for e in (g, table.inverse[g])]
        )
        n = table.n
        estrada_delta = math.exp((4 * theta) ** 2) / n**self.settings.ESTRADA_DELTA_EXPONENT
        estrada = self.estrada_even(generators, theta / 2, estrada_delta, table)
        record = EstradaAuditRecord(
            step=step,
            potential=self.expander_potential(x, table),
            estrada_form=estrada + 1 - math.cosh(theta * generators.size / 2),
        )
        logger.debug(
            f"audit step {step}: potential {record.potential:.12g}, "
            f"Estrada form {record.estrada_form:.12g}"
        )
        return record
