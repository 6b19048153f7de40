"""
Ordered fan-out of independent work items over a process pool.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from config.settings import WORKERS

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: int | None) -> int:
    return max(1, int(workers if workers is not None else WORKERS))


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """
    Apply `fn` to every item and return results in input order.

    `fn` must be a module-level callable (picklable). With one worker the map
    runs in-process.
    """
    items = list(items)
    n = resolve_workers(workers)
    if n == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (4 * n))
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
