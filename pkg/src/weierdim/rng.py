"""Counter-based random streams and deterministic chunked execution.

Every Monte Carlo sample belongs to a fixed-size chunk.  Chunk ``i`` of a
stream named ``tag`` under ``seed`` always draws from the same Philox
generator, so results do not depend on how chunks are scheduled across
threads.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

CHUNK = 1 << 15
THREADS_ENV = "WEIERDIM_THREADS"

T = TypeVar("T")


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, tag, index)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(tag.encode()), int(index)))
    return np.random.Generator(np.random.Philox(key))


def random_digits(gen: np.random.Generator, n: int, width: int) -> np.ndarray:
    """Uniform binary digits, shape ``(n, width)``, dtype uint8."""
    nbytes = (width + 7) // 8
    raw = np.frombuffer(gen.bytes(n * nbytes), dtype=np.uint8).reshape(n, nbytes)
    return np.unpackbits(raw, axis=1)[:, :width]


def chunk_bounds(n: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_ordered(fn: Callable[[int], T], count: int, threads: int | None = None) -> list[T]:
    """Apply ``fn`` to ``range(count)``; output order never depends on ``threads``."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def sum_ordered(parts: Sequence[np.ndarray | int | float]):
    """Left-to-right sum so floating results are identical for any thread count."""
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total
