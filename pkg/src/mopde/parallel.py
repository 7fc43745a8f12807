"""Order-preserving thread fan-out capped by ``MP_THREADS``."""
import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    try:
        n = int(os.environ.get("MP_THREADS", "0"))
    except ValueError:
        n = 0
    return max(1, n) if n else max(1, min(4, os.cpu_count() or 1))


def parallel_map(fn, items):
    """``[fn(i) for i in items]``, evaluated on up to ``worker_count()`` threads."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
