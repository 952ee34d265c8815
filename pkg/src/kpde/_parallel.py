"""Order-preserving process-pool map for independent work items.

Work functions are handed to forked workers through a module global, so
closures over arrays and compiled expressions need not be picklable.
Results come back in item order, which keeps reductions bitwise identical
for any worker count.
"""
from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor

_TASK = None


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``KPDE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("KPDE_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def _run(i):
    return _TASK(i)


def parallel_map(fn, n_items: int, threads: int | None = 1) -> list:
    """``[fn(i) for i in range(n_items)]``, optionally on a process pool."""
    global _TASK
    threads = resolve_threads(threads)
    if threads == 1 or n_items <= 1 or _TASK is not None:
        return [fn(i) for i in range(n_items)]
    _TASK = fn
    try:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(min(threads, n_items), mp_context=ctx) as pool:
            return list(pool.map(_run, range(n_items)))
    finally:
        _TASK = None
