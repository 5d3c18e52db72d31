"""Ordered process-pool map used by the Monte-Carlo and surface drivers."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, args, jobs: int = 1) -> list:
    """``[fn(a) for a in args]``, optionally spread over ``jobs`` processes.

    Results come back in input order, so callers that seed per item get the
    same output for any job count.
    """
    args = list(args)
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    chunk = max(1, len(args) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, args, chunksize=chunk))
