"""Order-preserving map over a process pool.

The shared object (usually the corpus index) is handed to each worker once
through the pool initializer; items stay small.  ``workers <= 1`` runs inline.
"""
from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_shared: Any = None


def _init(shared):
    global _shared
    _shared = shared


def _call(payload):
    fn, item = payload
    return fn(_shared, item)


def parallel_map(fn: Callable[[Any, T], R], items: Iterable[T], workers: int = 1,
                 shared: Any = None) -> list[R]:
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(shared, it) for it in items]
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                             initializer=_init, initargs=(shared,)) as pool:
        return list(pool.map(_call, [(fn, it) for it in items],
                             chunksize=max(1, len(items) // (4 * workers))))
