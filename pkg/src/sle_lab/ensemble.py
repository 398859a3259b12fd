"""Chunked, optionally multi-process ensemble execution.

Every path owns a random stream keyed by ``(seed, path_index)``, so the
concatenated output is the same for any chunk size or worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

JOBS_ENV = "SLE_LAB_JOBS"


def resolve_jobs(jobs: int | None = None) -> int:
    if jobs is None:
        jobs = int(os.environ.get(JOBS_ENV, "1") or 1)
    return max(1, int(jobs))


def chunks(n_paths: int, size: int) -> list[range]:
    size = max(1, int(size))
    return [range(i, min(i + size, n_paths)) for i in range(0, n_paths, size)]


def map_chunks(fn, n_paths: int, chunk: int, jobs: int | None = None, **kwargs) -> list:
    """Call ``fn(indices, **kwargs)`` for each chunk, results in chunk order."""
    parts = chunks(n_paths, chunk)
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(parts) == 1:
        return [fn(p, **kwargs) for p in parts]
    with ProcessPoolExecutor(max_workers=min(jobs, len(parts))) as ex:
        futures = [ex.submit(fn, p, **kwargs) for p in parts]
        return [f.result() for f in futures]


def concat(results, key: str | int) -> np.ndarray:
    return np.concatenate([r[key] for r in results], axis=0)
