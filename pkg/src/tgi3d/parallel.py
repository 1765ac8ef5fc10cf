"""Thread-pool helper for chunked kernels.

NumPy's BLAS calls and the compiled kernels release the GIL, so threads
are enough. Work is always split on fixed boundaries that do not depend on
the worker count, which keeps results bit-identical for any ``workers``.
"""

from concurrent.futures import ThreadPoolExecutor

from threadpoolctl import threadpool_limits


def chunks(n, size):
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def run_chunks(fn, n, size, workers=1):
    """Call ``fn(lo, hi)`` over fixed chunks of ``range(n)``; return results in order."""
    spans = chunks(n, size)
    # BLAS pinned to one thread so parallelism comes only from our fixed tiles.
    with threadpool_limits(limits=1, user_api="blas"):
        if workers <= 1 or len(spans) <= 1:
            return [fn(lo, hi) for lo, hi in spans]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda span: fn(*span), spans))
