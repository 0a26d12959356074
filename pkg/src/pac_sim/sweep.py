"""Bounded-concurrency batch runner for sweeps and comparisons."""

from __future__ import annotations

import asyncio
import logging
from collections.abc import Callable, Iterable
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


async def run_bounded(
    fn: Callable[[T], R], items: Iterable[T], workers: int = 4
) -> list[R | Exception]:
    """Run ``fn`` over ``items`` in worker threads, at most ``workers`` at once.

    Results come back in input order. A failing item yields its exception in
    place of a result, so one bad point does not stop the batch.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    gate = asyncio.Semaphore(workers)

    async def one(index: int, item: T) -> R | Exception:
        async with gate:
            try:
                return await asyncio.to_thread(fn, item)
            except Exception as e:
                logger.warning("batch item %d failed: %s", index, e)
                return e

    return await asyncio.gather(*(one(i, item) for i, item in enumerate(items)))


def run_batch(
    fn: Callable[[T], R], items: Iterable[T], workers: int = 4
) -> list[R | Exception]:
    return asyncio.run(run_bounded(fn, items, workers))
