"""
Finite groups given by their multiplication table, and the group algebra R[G].

Element ids are 0-based here; files and reports use 1-based ids.
"""

import itertools
import math
from collections import Counter

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, DomainError, GuardExceededError
from app.core.linalg import SymMatrix, sym_matrix
from app.models.enums import GroupKind
from app.models.family import SampleFamily, uniform_weights


class GroupTable(BaseModel):
    """
    Multiplication table of a finite group: product[g, h] = g * h.

    The identity and the inverse map are discovered from the table.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    product: np.ndarray
    identity: int = Field(default=-1)
    inverse: np.ndarray | None = None
    label: str = ""

    @field_validator("product", mode="before")
    def validate_latin_square(cls, v):
        table = np.asarray(v)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] < 1:
            raise ValueError(f"Multiplication table must be square and non-empty, got {table.shape}")
        if not np.issubdtype(table.dtype, np.integer):
            if not np.all(np.equal(np.mod(table, 1), 0)):
                raise ValueError("Multiplication table entries must be integers")
        table = table.astype(np.int64)
        n = table.shape[0]
        if table.min() < 0 or table.max() >= n:
            raise ValueError(f"Multiplication table entries must be element ids in [1, {n}]")
        expected = np.arange(n)
        for g in range(n):
            if not np.array_equal(np.sort(table[g]), expected):
                raise ValueError(f"Row {g + 1} is not a permutation of the elements")
        for h in range(n):
            if not np.array_equal(np.sort(table[:, h]), expected):
                raise ValueError(f"Column {h + 1} is not a permutation of the elements")
        table.setflags(write=False)
        return table

    @model_validator(mode="after")
    def derive_identity_and_inverse(self):
        table = self.product
        n = table.shape[0]
        elements = np.arange(n)
        candidates = [
            e
            for e in range(n)
            if np.array_equal(table[e], elements) and np.array_equal(table[:, e], elements)
        ]
        if not candidates:
            raise ValueError("No identity element: no row and column equal the element order")
        self.identity = int(candidates[0])

        inverse = np.empty(n, dtype=np.int64)
        for g in range(n):
            right = np.flatnonzero(table[g] == self.identity)
            h = int(right[0])
            if table[h, g] != self.identity:
                raise ValueError(f"Element {g + 1} has no two-sided inverse")
            inverse[g] = h
        inverse.setflags(write=False)
        self.inverse = inverse

        samples = settings.ASSOCIATIVITY_SAMPLES_PER_ELEMENT * n
        triple = self.associativity_violation(samples)
        if triple is not None:
            g, h, k = (x + 1 for x in triple)
            raise ValueError(f"Associativity fails on the triple ({g}, {h}, {k})")
        return self

    @property
    def n(self) -> int:
        return int(self.product.shape[0])

    def associativity_violation(self, samples: int | None = None) -> tuple[int, int, int] | None:
        """
        First triple (g, h, k) with (gh)k != g(hk). `samples=None` checks all n^3 triples,
        otherwise a fixed pseudo-random sample is drawn.
        """
        table = self.product
        n = self.n
        if samples is None:
            lhs = table[table[:, :, None], np.arange(n)[None, None, :]]
            rhs = table[np.arange(n)[:, None, None], table[None, :, :]]
            bad = np.argwhere(lhs != rhs)
        else:
            rng = np.random.default_rng(n)
            g, h, k = rng.integers(0, n, size=(3, samples))
            mask = table[table[g, h], k] != table[g, table[h, k]]
            bad = np.column_stack([g, h, k])[mask]
        if bad.shape[0] == 0:
            return None
        return tuple(int(x) for x in bad[0])

    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.product, self.product.T))


class GeneratorMultiset(BaseModel):
    """Multiset of group elements closed under inversion."""

    elements: list[int] = Field(default_factory=list)

    @classmethod
    def from_elements(cls, elements: ArrayLike, table: GroupTable) -> "GeneratorMultiset":
        items = [int(x) for x in np.asarray(elements, dtype=np.int64).ravel()]
        if not items:
            raise DomainError("Generator multiset must be non-empty")
        if min(items) < 0 or max(items) >= table.n:
            raise DomainError(f"Generator ids must lie in [1, {table.n}]")
        counts = Counter(items)
        for s, count in counts.items():
            s_inv = int(table.inverse[s])
            if s_inv != s and counts.get(s_inv, 0) != count:
                raise DomainError(
                    f"Element {s + 1} occurs {count} times but its inverse {s_inv + 1} "
                    f"occurs {counts.get(s_inv, 0)} times"
                )
        return cls(elements=items)

    @property
    def size(self) -> int:
        return len(self.elements)

    def counts(self, n: int) -> NDArray[np.float64]:
        return np.bincount(np.asarray(self.elements, dtype=np.int64), minlength=n).astype(np.float64)

    def multiplicities(self) -> list[tuple[int, int]]:
        """(1-based id, multiplicity) pairs sorted by id."""
        return sorted((s + 1, c) for s, c in Counter(self.elements).items())


def basis_element(g: int, n: int) -> NDArray[np.float64]:
    x = np.zeros(n)
    x[g] = 1.0
    return x


def convolve(a: ArrayLike, b: ArrayLike, table: GroupTable) -> NDArray[np.float64]:
    """
    Product in R[G]: out[g*h] += a[g] * b[h]. Costs O(n * |supp(b)|).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (table.n,) or b.shape != (table.n,):
        raise DimensionMismatchError(f"Group algebra elements must have length {table.n}")
    out = np.zeros(table.n)
    for h in np.flatnonzero(b):
        # column h of the table is a permutation, so no index repeats
        out[table.product[:, h]] += a * b[h]
    return out


def convolve_batch(
    a: NDArray[np.float64], b: NDArray[np.float64], product: NDArray[np.int64]
) -> NDArray[np.float64]:
    """Row-wise products a[k] * b[k] for (K, n) stacks of group algebra elements."""
    count, n = a.shape
    offsets = (np.arange(count) * n)[:, None, None]
    weights = a[:, :, None] * b[:, None, :]
    out = np.bincount((product[None, :, :] + offsets).ravel(), weights.ravel(), minlength=count * n)
    return out.reshape(count, n)


def right_regular(g: int, table: GroupTable) -> NDArray[np.float64]:
    """Permutation matrix with R(g)[x, x*g] = 1, so that R(g) R(h) = R(gh)."""
    if not 0 <= g < table.n:
        raise DomainError(f"Element id {g + 1} outside [1, {table.n}]")
    r = np.zeros((table.n, table.n))
    r[np.arange(table.n), table.product[:, g]] = 1.0
    return r


def regular_matrix(x: ArrayLike, table: GroupTable) -> NDArray[np.float64]:
    """R(x) = sum_g x[g] R(g) for a group algebra element x."""
    x = np.asarray(x, dtype=np.float64)
    rows = np.repeat(np.arange(table.n), table.n)
    r = np.zeros((table.n, table.n))
    np.add.at(r, (rows, table.product.ravel()), np.tile(x, table.n))
    return r


def adjacency(generators: GeneratorMultiset, table: GroupTable) -> SymMatrix:
    """A = sum_{s in S} R(s) with exact integer counts."""
    return sym_matrix(regular_matrix(generators.counts(table.n), table))


def generate_table(kind: GroupKind | str, order: int) -> GroupTable:
    """
    cyclic n -> Z_n, dihedral n -> D_n of order 2n, symmetric k -> S_k of order k!.
    """
    kind = GroupKind(kind)
    if order < 1:
        raise DomainError("Group parameter must be positive")
    size = {
        GroupKind.CYCLIC: order,
        GroupKind.DIHEDRAL: 2 * order,
        GroupKind.SYMMETRIC: math.factorial(order),
    }[kind]
    if size > settings.GROUP_ORDER_LIMIT:
        raise GuardExceededError(f"{kind.label} has order {size} > {settings.GROUP_ORDER_LIMIT}")

    if kind == GroupKind.CYCLIC:
        idx = np.arange(order)
        product = (idx[:, None] + idx[None, :]) % order
    elif kind == GroupKind.DIHEDRAL:
        # r^a s^f encoded as f * n + a; s r^b = r^{-b} s
        elements = [(f, a) for f in range(2) for a in range(order)]
        product = np.empty((size, size), dtype=np.int64)
        for i, (f, a) in enumerate(elements):
            for j, (g, b) in enumerate(elements):
                rot = (a + (b if f == 0 else -b)) % order
                product[i, j] = ((f + g) % 2) * order + rot
    else:
        perms = list(itertools.permutations(range(order)))
        index = {p: i for i, p in enumerate(perms)}
        product = np.empty((size, size), dtype=np.int64)
        for i, p in enumerate(perms):
            for j, q in enumerate(perms):
                # apply p first, then q
                product[i, j] = index[tuple(q[p[x]] for x in range(order))]

    return GroupTable(product=product, label=f"{kind.value} {order}")


class CayleyFamily(SampleFamily):
    """
    f(g) = (R(g) + R(g^-1)) / 2 - J/n under the uniform distribution on G;
    gamma = rho_sq = 2.
    """

    def __init__(self, table: GroupTable):
        self.table = table
        self.m = table.n
        self.n = table.n
        self.gamma = 2.0
        self.rho_sq = 2.0

    @property
    def weights(self) -> NDArray[np.float64]:
        return uniform_weights(self.m)

    def evaluate(self, step: int, index: int) -> SymMatrix:
        n = self.table.n
        inverse = int(self.table.inverse[index])
        sym = 0.5 * (right_regular(index, self.table) + right_regular(inverse, self.table))
        return sym - np.full((n, n), 1.0 / n)
