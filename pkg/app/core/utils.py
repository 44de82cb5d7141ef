"""
Readers and writers for the whitespace and Matrix Market input formats.

All files use 1-based indices; everything returned to the services is 0-based.
Blank lines and lines starting with '#' are skipped in whitespace formats.
"""

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse
from numpy.typing import NDArray

from app.core.exceptions import FileFormatError
from app.models.group import GroupTable

MATRIX_MARKET_BANNER = "%%MatrixMarket"

Edge = tuple[int, int, float]


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FileFormatError(str(path), None, f"cannot read file ({exc.strerror})") from exc


def _records(text: str) -> list[tuple[int, list[str]]]:
    out = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            out.append((number, stripped.split()))
    return out


def _ints(source: str, number: int, tokens: list[str], count: int) -> list[int]:
    if len(tokens) != count:
        raise FileFormatError(source, number, f"expected {count} integers, got {len(tokens)} fields")
    try:
        return [int(token) for token in tokens]
    except ValueError as exc:
        raise FileFormatError(source, number, f"not an integer: {exc}") from exc


def _floats(source: str, number: int, tokens: list[str], count: int) -> list[float]:
    if len(tokens) != count:
        raise FileFormatError(source, number, f"expected {count} numbers, got {len(tokens)} fields")
    try:
        return [float(token) for token in tokens]
    except ValueError as exc:
        raise FileFormatError(source, number, f"not a number: {exc}") from exc


def parse_group_table(text: str, source: str = "<table>") -> GroupTable:
    """
    Line 1: n. Lines 2..n+1: row g lists g*h for h = 1..n as 1-based ids.
    Latin square, identity, inverse and associativity checks happen in GroupTable.
    """
    records = _records(text)
    if not records:
        raise FileFormatError(source, None, "empty group table")
    number, tokens = records[0]
    (n,) = _ints(source, number, tokens, 1)
    if n < 1:
        raise FileFormatError(source, number, f"group order must be positive, got {n}")
    if len(records) != n + 1:
        raise FileFormatError(source, None, f"expected {n} table rows, got {len(records) - 1}")

    product = np.empty((n, n), dtype=np.int64)
    for g, (number, tokens) in enumerate(records[1:]):
        row = _ints(source, number, tokens, n)
        if min(row) < 1 or max(row) > n:
            raise FileFormatError(source, number, f"element ids must lie in [1, {n}]")
        product[g] = np.asarray(row) - 1
    return GroupTable(product=product, label=source)


def read_group_table(path: str | Path) -> GroupTable:
    return parse_group_table(_read(path), source=str(path))


def format_group_table(table: GroupTable) -> str:
    rows = [" ".join(str(int(v) + 1) for v in row) for row in table.product]
    return "\n".join([str(table.n), *rows]) + "\n"


def parse_dense_matrix(text: str, source: str = "<matrix>") -> NDArray[np.float64]:
    """First record "m n", then m rows of n numbers."""
    records = _records(text)
    if not records:
        raise FileFormatError(source, None, "empty matrix file")
    number, tokens = records[0]
    m, n = _ints(source, number, tokens, 2)
    if m < 1 or n < 1:
        raise FileFormatError(source, number, f"matrix dimensions must be positive, got {m} x {n}")
    if len(records) != m + 1:
        raise FileFormatError(source, None, f"expected {m} rows, got {len(records) - 1}")
    return np.array([_floats(source, number, tokens, n) for number, tokens in records[1:]])


def read_matrix(path: str | Path) -> NDArray[np.float64]:
    """Dense whitespace or Matrix Market (array or coordinate) file as a dense array."""
    text = _read(path)
    if text.lstrip().startswith(MATRIX_MARKET_BANNER):
        try:
            data = scipy.io.mmread(str(path))
        except ValueError as exc:
            raise FileFormatError(str(path), None, f"invalid Matrix Market file: {exc}") from exc
        if scipy.sparse.issparse(data):
            data = data.toarray()
        return np.asarray(data, dtype=np.float64)
    return parse_dense_matrix(text, source=str(path))


def parse_matrix_list(text: str, source: str = "<matrices>") -> list[NDArray[np.float64]]:
    """First record "N d", then N blocks of d rows with d numbers each."""
    records = _records(text)
    if not records:
        raise FileFormatError(source, None, "empty matrix list")
    number, tokens = records[0]
    count, d = _ints(source, number, tokens, 2)
    if count < 1 or d < 1:
        raise FileFormatError(source, number, f"need N >= 1 matrices of size d >= 1, got {count}, {d}")
    if len(records) != count * d + 1:
        raise FileFormatError(source, None, f"expected {count * d} matrix rows, got {len(records) - 1}")
    rows = [_floats(source, number, tokens, d) for number, tokens in records[1:]]
    return [np.array(rows[k * d : (k + 1) * d]) for k in range(count)]


def read_matrix_list(path: str | Path) -> list[NDArray[np.float64]]:
    return parse_matrix_list(_read(path), source=str(path))


def parse_edge_list(text: str, source: str = "<graph>") -> tuple[int, list[Edge]]:
    """First record "n m", then m records "i j w" with 1-based vertices."""
    records = _records(text)
    if not records:
        raise FileFormatError(source, None, "empty edge list")
    number, tokens = records[0]
    n, m = _ints(source, number, tokens, 2)
    if len(records) != m + 1:
        raise FileFormatError(source, None, f"expected {m} edges, got {len(records) - 1}")
    edges = []
    for number, tokens in records[1:]:
        if len(tokens) != 3:
            raise FileFormatError(source, number, f"expected 'i j w', got {len(tokens)} fields")
        i, j = _ints(source, number, tokens[:2], 2)
        (w,) = _floats(source, number, tokens[2:], 1)
        edges.append((i - 1, j - 1, w))
    return n, edges


def read_edge_list(path: str | Path) -> tuple[int, list[Edge]]:
    return parse_edge_list(_read(path), source=str(path))


def format_edge_list(n: int, edges: list[Edge]) -> str:
    lines = [f"{n} {len(edges)}"] + [f"{i + 1} {j + 1} {w:.17g}" for i, j, w in edges]
    return "\n".join(lines) + "\n"


def write_matrix_market(path: str | Path, rows, cols, values, n: int) -> None:
    matrix = scipy.sparse.coo_matrix((values, (rows, cols)), shape=(n, n))
    scipy.io.mmwrite(str(path), matrix, precision=17)
