"""Counter-based random streams.

All randomness in the package comes from Philox4x64-10 (``numpy.random.Philox``)
keyed by ``(master_seed, stream_id)``.  Trials are grouped into fixed chunks of
``CHUNK`` consecutive indices; chunk ``c`` starts the Philox counter at
``[0, c, 0, 0]``.  The draws for trial ``i`` therefore depend only on the seed,
the stream id and ``i`` itself, never on how chunks are spread over workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, TypeVar

import numpy as np

ALGORITHM = "philox4x64-10"
CHUNK = 1 << 16
MAX_SEED = (1 << 64) - 1

# stream ids
SETTINGS = 0
SOURCE = 1
INSTRUMENT_A = 2
INSTRUMENT_B = 3
JITTER_A = 4
JITTER_B = 5
COUPLING = 6

T = TypeVar("T")


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def generator(seed: int, stream: int, chunk: int = 0) -> np.random.Generator:
    """Generator positioned at the start of ``chunk`` for ``(seed, stream)``."""
    key = np.array([check_seed(seed), stream], dtype=np.uint64)
    counter = np.array([0, chunk, 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def chunks(n: int) -> Iterator[tuple[int, int, int]]:
    """Yield ``(chunk_index, start, stop)`` covering ``range(n)``."""
    for c, start in enumerate(range(0, n, CHUNK)):
        yield c, start, min(start + CHUNK, n)


def uniforms(seed: int, stream: int, chunk: int, size: int) -> np.ndarray:
    return generator(seed, stream, chunk).random(size)


def normals(seed: int, stream: int, chunk: int, size: int) -> np.ndarray:
    return generator(seed, stream, chunk).standard_normal(size)


def map_chunks(fn: Callable[[int, int, int], T], n: int, workers: int = 1) -> list[T]:
    """Apply ``fn(chunk, start, stop)`` to every chunk, results in chunk order."""
    spans = list(chunks(n))
    if workers <= 1 or len(spans) <= 1:
        return [fn(*s) for s in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: fn(*s), spans))


def categorical(u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of indices into ``p`` from uniforms ``u`` in [0, 1)."""
    cdf = np.cumsum(p, dtype=np.float64)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, u, side="right")
