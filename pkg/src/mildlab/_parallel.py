import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .jets import Jet


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("MILDLAB_THREADS", "1")))
    except ValueError:
        return 1


def map_points(fn, points: np.ndarray, chunk: int = 256):
    """Apply ``fn`` (points -> Jet or list of Jets) to chunks, in order.

    Chunks are independent; results are concatenated in input order so the
    outcome does not depend on the thread count.
    """
    points = np.asarray(points, dtype=float)
    if len(points) <= chunk:
        return fn(points)
    pieces = [points[i:i + chunk] for i in range(0, len(points), chunk)]
    workers = n_threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(fn, pieces))
    else:
        results = [fn(p) for p in pieces]
    return _concat(results)


def _concat(results):
    first = results[0]
    if isinstance(first, Jet):
        return Jet(np.concatenate([j.point for j in results]), first.order,
                   np.concatenate([j.coeffs for j in results]))
    return [_concat([r[i] for r in results]) for i in range(len(first))]
