from __future__ import annotations

import concurrent.futures
import logging
import os
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: int) -> int:
    """0 means one worker per core."""
    return workers if workers > 0 else max(1, os.cpu_count() or 1)


def run_ordered(fn: Callable[[T], R], items: Iterable[T], workers: int = 0, label: str = "job") -> list[R]:
    """Apply ``fn`` to every item on a thread pool; results come back in submission order.

    The first failure is re-raised after every job has finished.
    """
    items = list(items)
    n_workers = min(resolve_workers(workers), max(1, len(items)))
    if n_workers == 1:
        return [fn(item) for item in items]

    results: list[R | None] = [None] * len(items)
    failure: BaseException | None = None
    with concurrent.futures.ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
        for future in concurrent.futures.as_completed(futures):
            index = futures[future]
            try:
                results[index] = future.result()
            except Exception as exc:
                logger.exception("%s %d failed", label, index)
                if failure is None:
                    failure = exc
    if failure is not None:
        raise failure
    return results  # type: ignore[return-value]
