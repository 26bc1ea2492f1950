"""Deterministic worker-pool helper.

``HYPERX_THREADS`` caps the pool size (default: available cores).  Tasks must
be pure functions of their argument; results are returned in input order, so
output never depends on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    raw = os.environ.get("HYPERX_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValueError(f"HYPERX_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ValueError("HYPERX_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Apply fn to every item, possibly on a thread pool; order is preserved."""
    workers = min(thread_count(), len(items)) if items else 0
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
