"""Deterministic per-wavelength parallelism.

Each wavelength's computation is independent; results are collected in input
order so reductions are identical regardless of the worker count.  Workers
are forked processes because the assembly code is Python/numpy-bound and
gains nothing from threads.
"""

from __future__ import annotations

import multiprocessing as mp
import os


def default_threads() -> int:
    return os.cpu_count() or 1


_WORKER_LIMITER = None


def _pin_blas_single_threaded():
    # Nested BLAS threads fight the process-level workers on few-core hosts.
    global _WORKER_LIMITER
    try:
        from threadpoolctl import threadpool_limits
        _WORKER_LIMITER = threadpool_limits(limits=1)
    except Exception:
        _WORKER_LIMITER = None


def parallel_map(fn, items, workers: int = 1):
    """Order-preserving map over picklable items with a module-level callable.

    Runs serially for workers <= 1 (or short inputs); otherwise forks a
    process pool (BLAS pinned to one thread inside each worker).  Results are
    returned in input order.
    """
    items = list(items)
    if workers is None:
        workers = default_threads()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    workers = min(workers, len(items))
    with mp.get_context("fork").Pool(workers, initializer=_pin_blas_single_threaded) as pool:
        return pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers)))


def ordered_map(fn, items, threads: int = 1):
    """Serial order-preserving map (kept for call sites with closures)."""
    if threads is not None and threads > 1:
        try:
            return parallel_map(fn, items, threads)
        except Exception:
            pass  # closures or unpicklable payloads fall back to serial
    return [fn(x) for x in items]
