from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from app.core.config import settings
from app.core.exceptions import DomainError


def chunk_slices(count: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, count))
    bounds = np.linspace(0, count, parts + 1).astype(int)
    return [slice(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def map_chunks(
    fn: Callable[[slice], NDArray[np.float64]], count: int, threads: int | None = None
) -> NDArray[np.float64]:
    """
    Evaluate fn over contiguous index blocks covering 0..count-1 and
    concatenate the results in index order.

    Blocks are reassembled by position, so the outcome does not depend on the
    number of workers or on completion order.
    """
    threads = settings.THREADS if threads is None else threads
    if count == 0:
        return np.empty(0)
    if threads <= 1 or count < 2:
        return np.asarray(fn(slice(0, count)), dtype=np.float64)

    blocks = chunk_slices(count, threads)
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        parts = list(pool.map(fn, blocks))
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])


def argmin_smallest_index(values: NDArray[np.float64], tol: float | None = None) -> int:
    """Index of the minimum; values within `tol` of it count as tied and the smallest index wins."""
    tol = settings.TIE_LOG_TOL if tol is None else tol
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DomainError("No candidates to choose from")
    nan = np.flatnonzero(np.isnan(values))
    if nan.shape[0]:
        raise DomainError(f"Candidate {int(nan[0]) + 1} has a NaN potential")
    best = float(np.min(values))
    return int(np.flatnonzero(values <= best + tol)[0])
