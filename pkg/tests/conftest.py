import numpy as np
import pytest

from app.models.group import generate_table


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)


@pytest.fixture
def random_symmetric(rng):
    def make(n: int, scale: float = 1.0) -> np.ndarray:
        g = rng.standard_normal((n, n))
        return scale * (g + g.T) / 2

    return make


@pytest.fixture
def random_psd(rng):
    def make(n: int, rank: int | None = None) -> np.ndarray:
        g = rng.standard_normal((n, rank or n))
        return g @ g.T

    return make


@pytest.fixture
def orthonormal_rows(rng):
    """m x n matrix whose rows are in isotropic position (A^T A = I_n)."""

    def make(m: int, n: int) -> np.ndarray:
        q, _ = np.linalg.qr(rng.standard_normal((m, n)))
        return q

    return make


@pytest.fixture
def diagonally_dominant(rng):
    """Random symmetric matrix with |A_ii| >= sum_j |A_ij| and a mix of signs."""

    def make(n: int, density: float = 0.5) -> np.ndarray:
        g = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
        a = np.triu(g, k=1)
        a = a + a.T
        np.fill_diagonal(a, np.abs(a).sum(axis=1) + rng.random(n))
        return a

    return make


@pytest.fixture
def z8():
    return generate_table("cyclic", 8)


@pytest.fixture
def write_file(tmp_path):
    def write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write
