"""Index-keyed task map over a read-only context.

Tasks are pure functions of ``(index, ctx)``; results come back sorted by
index, so the output is the same for any worker count.
"""

from __future__ import annotations

import multiprocessing as mp
import os
from typing import Callable, Sequence

_CTX: dict = {}
_FN: list = []


def _init(fn, ctx):
    _FN[:] = [fn]
    _CTX.clear()
    _CTX.update(ctx)


def _chunk(indices):
    fn = _FN[0]
    return [(i, fn(i, _CTX)) for i in indices]


def default_workers() -> int:
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0))
    return os.cpu_count() or 1


def run_tasks(fn: Callable, ctx: dict, indices: Sequence[int], workers: int = 1) -> list:
    """``[fn(i, ctx) for i in sorted(indices)]``, optionally on a process pool."""
    indices = sorted(indices)
    if workers <= 1 or len(indices) < 2:
        return [fn(i, ctx) for i in indices]
    chunk = max(1, len(indices) // (workers * 8))
    chunks = [indices[i:i + chunk] for i in range(0, len(indices), chunk)]
    with mp.get_context("fork").Pool(workers, _init, (fn, ctx)) as pool:
        out = [r for part in pool.imap_unordered(_chunk, chunks) for r in part]
    out.sort(key=lambda r: r[0])
    return [r for _, r in out]
