"""Deterministic worker parallelism.

Tasks are mapped over a fixed index order and collected by index, so the
result is identical for any worker count; LEVYPOT_THREADS caps the pool
(default: machine parallelism).  The heavy lifting inside each task is
numpy, which releases the GIL, so threads give real speedup.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    env = os.environ.get("LEVYPOT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_indexed(fn, items):
    """[fn(item) for item in items], evaluated on the worker pool."""
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
