"""Worker pool used by the per-sample kernels.

Work is always split one batch item per task and results are combined in
sample order, so the worker count never changes a single bit of output.
BLAS is pinned to one thread for the same reason.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from threadpoolctl import threadpool_limits

_threads = 1
_pool: ThreadPoolExecutor | None = None
_blas_limit = None


def get_threads() -> int:
    return _threads


def set_threads(n: int) -> None:
    global _threads, _pool, _blas_limit
    n = max(1, int(n))
    if _blas_limit is None:
        _blas_limit = threadpool_limits(limits=1, user_api="blas")
    if n == _threads and (_pool is not None or n == 1):
        return
    if _pool is not None:
        _pool.shutdown(wait=True)
        _pool = None
    _threads = n
    if n > 1:
        _pool = ThreadPoolExecutor(max_workers=n, thread_name_prefix="fpa3d")


@contextmanager
def threads(n: int):
    old = _threads
    set_threads(n)
    try:
        yield
    finally:
        set_threads(old)


def pmap(fn, items):
    """``[fn(i) for i in items]``, evaluated on the pool when one is active."""
    items = list(items)
    if _pool is None or len(items) < 2:
        return [fn(i) for i in items]
    return list(_pool.map(fn, items))


def hardware_description() -> str:
    import platform

    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{cpu}; logical_cpus={os.cpu_count()}; {platform.system()} {platform.release()}"


set_threads(1)
