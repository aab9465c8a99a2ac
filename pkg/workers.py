"""Ordered fan-out of independent jobs over a thread pool."""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from settings import resolve_threads

T = TypeVar("T")
R = TypeVar("R")


async def _gather(fn: Callable[[T], R], items: List[T], pool: ThreadPoolExecutor) -> List[R]:
    loop = asyncio.get_running_loop()
    tasks = [loop.run_in_executor(pool, fn, item) for item in items]
    return await asyncio.gather(*tasks)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Apply ``fn`` to every item; results come back in input order.

    With a single worker the jobs run inline, which keeps tracebacks short
    and avoids an event loop when the caller already runs one.
    """
    items = list(items)
    workers = resolve_threads(threads)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return asyncio.run(_gather(fn, items, pool))
