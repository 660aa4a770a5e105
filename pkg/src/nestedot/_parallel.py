"""Deterministic parallel map capped by ``NESTED_OT_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

# below this many tasks the pool costs more than it saves
_MIN_PARALLEL = 16


def thread_count() -> int:
    env = os.environ.get("NESTED_OT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def pmap(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """``[fn(x) for x in items]``; results land in input order regardless of schedule."""
    n = thread_count()
    if n == 1 or len(items) < _MIN_PARALLEL:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
