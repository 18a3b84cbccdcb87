"""Layer-level thread pool, capped by the KCM_THREADS environment variable.

Work items are independent per layer and results are collected in submission
order, so outputs never depend on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    raw = os.environ.get("KCM_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap >= 1:
        return cap
    return min(4, os.cpu_count() or 1)


def map_ordered(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    workers = min(thread_count(), len(items)) or 1
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
