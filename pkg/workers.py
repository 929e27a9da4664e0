"""
Fan-out utilities for independent jobs

Jobs are split into chunks and run on a process pool; results always come
back in job order so aggregation stays deterministic.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def chunk_items(items: Sequence[T], chunk_size: int = 1000) -> List[List[T]]:
    """
    Split a sequence into consecutive chunks

    Args:
        items: Items to chunk
        chunk_size: Maximum size of each chunk

    Returns:
        List of chunks, in order
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    return [list(items[i : i + chunk_size]) for i in range(0, len(items), chunk_size)]


def _run_chunk(fn: Callable[[Any], R], chunk: List[Any]) -> List[R]:
    return [fn(item) for item in chunk]


def map_ordered(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """
    Apply `fn` to every item, optionally across `jobs` processes

    Args:
        fn: Picklable top-level callable
        items: Job inputs
        jobs: Worker count; 1 runs inline

    Returns:
        Results in the same order as `items`
    """
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    chunk_size = max(1, -(-len(items) // (jobs * 4)))
    chunks = chunk_items(items, chunk_size)
    results: List[R] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_run_chunk, [fn] * len(chunks), chunks):
            results.extend(part)
    return results
