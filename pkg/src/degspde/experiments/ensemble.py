"""
Chunked ensemble execution.

Trajectories are split into chunks of a fixed size that does not depend on
the number of worker threads.  Each chunk draws its noise from its own
trajectory indices, and results are reduced in chunk order, so every
aggregate is independent of scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

DEFAULT_CHUNK = 100

T = TypeVar("T")


def default_threads() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return max(1, os.cpu_count() or 1)


def split_chunks(trajectories: Sequence[int], chunk_size: int = DEFAULT_CHUNK) -> list[np.ndarray]:
    traj = np.asarray(trajectories, dtype=np.int64)
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    return [traj[i : i + chunk_size] for i in range(0, traj.shape[0], chunk_size)]


def map_chunks(
    fn: Callable[[np.ndarray], T],
    trajectories: Sequence[int],
    chunk_size: int = DEFAULT_CHUNK,
    threads: Optional[int] = None,
) -> list[T]:
    """Apply ``fn`` to each chunk of trajectory indices; results in chunk order."""
    return map_tasks(fn, split_chunks(trajectories, chunk_size), threads)


def map_tasks(fn: Callable[[object], T], tasks: Sequence[object], threads: Optional[int] = None) -> list[T]:
    """Apply ``fn`` to each task; results in task order."""
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
