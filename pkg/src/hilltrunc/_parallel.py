"""Order-preserving map over independent work items.

``HILL_THREADS`` caps the worker count (default 1: run inline). Kernels
release the GIL, so threads give real overlap on the compiled backend.
"""
import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("HILL_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"HILL_THREADS must be a positive integer, got {raw!r}") from None


def map_ordered(fn, items):
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
