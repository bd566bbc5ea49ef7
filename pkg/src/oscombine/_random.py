"""Seeded substreams for chunked Monte Carlo.

Work is cut into fixed-size chunks and chunk ``k`` always draws from the
``k``-th child of ``SeedSequence(seed)``. The random stream of any sample
therefore depends only on ``(seed, chunk index)``, never on how many workers
ran the chunks or in what order they finished.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

DEFAULT_SEED = 12345
CHUNK_SIZE = 65536

T = TypeVar("T")


def chunk_bounds(total: int, chunk: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(start, min(chunk, total - start)) for start in range(0, total, chunk)]


def map_chunks(
    fn: Callable[[np.random.Generator, int, int], T],
    total: int,
    seed: int,
    workers: int = 1,
    chunk: int = CHUNK_SIZE,
) -> list[T]:
    """Run ``fn(rng, start, count)`` over every chunk; results come back in chunk order."""
    bounds = chunk_bounds(total, chunk)
    children = np.random.SeedSequence(seed).spawn(len(bounds))

    def run(k: int) -> T:
        rng = np.random.Generator(np.random.PCG64(children[k]))
        start, count = bounds[k]
        return fn(rng, start, count)

    if workers <= 1 or len(bounds) == 1:
        return [run(k) for k in range(len(bounds))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(bounds))))
