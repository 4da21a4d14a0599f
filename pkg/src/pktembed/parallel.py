"""Process-pool helper for packet-chunk parallelism.

Work is split into contiguous chunks processed by forked workers; results
come back in submission order, so any worker count produces output
identical to the sequential path (which runs the same chunk functions
inline). Shared read-only state (capture contents, vocabulary tables,
embedding rows, models) is passed once per pool and inherited copy-on-write
under the fork start method.
"""

import multiprocessing
from concurrent.futures import ProcessPoolExecutor

_CTX = None


def chunk_ranges(n: int, parts: int) -> list:
    """Split range(n) into up to ``parts`` contiguous (start, stop) spans."""
    parts = max(1, min(parts, n)) if n else 1
    if n == 0:
        return [(0, 0)]
    base, extra = divmod(n, parts)
    bounds = []
    start = 0
    for i in range(parts):
        stop = start + base + (1 if i < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def _set_ctx(ctx):
    global _CTX
    _CTX = ctx


def _invoke(func, payload):
    return func(_CTX, payload)


def map_chunks(func, payloads, ctx, workers: int) -> list:
    """Apply func(ctx, payload) over payloads, optionally in worker processes.

    ``func`` must be a module-level function. Falls back to sequential
    execution when workers <= 1, when there is only one payload, or when
    the fork start method is unavailable.
    """
    if workers <= 1 or len(payloads) <= 1:
        return [func(ctx, p) for p in payloads]
    try:
        mp_ctx = multiprocessing.get_context("fork")
    except ValueError:
        return [func(ctx, p) for p in payloads]
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads)),
                             mp_context=mp_ctx,
                             initializer=_set_ctx, initargs=(ctx,)) as pool:
        futures = [pool.submit(_invoke, func, p) for p in payloads]
        return [f.result() for f in futures]
