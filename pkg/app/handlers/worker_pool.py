#!/usr/bin/env python3
"""
Ordered parallel map for the embarrassingly parallel sweeps (surface cells,
weak* study entries). Results always come back in input order.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: Optional[int]) -> int:
    """Clamp a requested worker count to [1, cpu_count]"""
    if workers is None or workers < 1:
        return 1
    return max(1, min(int(workers), os.cpu_count() or 1))


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = 1) -> List[R]:
    """
    Apply func to every item.

    Args:
        func: Picklable callable (module-level function or functools.partial of one)
        items: Inputs
        workers: Process count; 1 runs inline in this process

    Returns:
        Results in the order of items
    """
    items = list(items)
    n = resolve_workers(workers)
    if n == 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.info(f"🏊 Running {len(items)} tasks on {n} worker processes")
    chunksize = max(1, len(items) // (4 * n))
    with ProcessPoolExecutor(max_workers=n) as executor:
        return list(executor.map(func, items, chunksize=chunksize))
