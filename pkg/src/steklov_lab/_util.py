"""Small shared helpers: bounded thread pool and deterministic serialization."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable

import numpy as np

THREADS_ENV = "STEKLOV_LAB_THREADS"


def thread_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def parallel_map(func: Callable, items: Iterable, threads: int | None = None) -> list:
    """Order-preserving map, threaded when ``STEKLOV_LAB_THREADS`` > 1."""
    items = list(items)
    nthreads = thread_count() if threads is None else max(1, threads)
    if nthreads == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(func, items))


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc) -> str:
    """Stable JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(doc, sort_keys=True, indent=2, default=_default) + "\n"
