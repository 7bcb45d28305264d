"""Element-chunk reductions, serial by default.

QUADFEM_THREADS=0 (the default) sums chunk results in element order, which
makes every run bit-identical. A positive value sums in completion order
on that many threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

CHUNK = 4096


def thread_count(deterministic=False):
    if deterministic:
        return 0
    try:
        return max(0, int(os.environ.get("QUADFEM_THREADS", "0")))
    except ValueError:
        raise ValueError("QUADFEM_THREADS must be a nonnegative integer") from None


def chunks(n, size=CHUNK):
    return [np.arange(s, min(s + size, n)) for s in range(0, n, size)]


def reduce_sum(fn, n_items, threads=None):
    """Sum ``fn(indices)`` over consecutive index chunks."""
    if threads is None:
        threads = thread_count()
    parts = chunks(n_items)
    if threads <= 0 or len(parts) == 1:
        total = 0.0
        for idx in parts:
            total = total + fn(idx)
        return total
    total = 0.0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for fut in as_completed([pool.submit(fn, idx) for idx in parts]):
            total = total + fut.result()
    return total
