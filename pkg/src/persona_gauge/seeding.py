"""Deterministic random-stream splitting.

Every random stream is keyed by ``(master_seed, *keys)``; string keys are
folded to 32-bit integers through SHA-256.  Streams therefore do not depend on
the order in which work items are scheduled.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def _key(k) -> int:
    if isinstance(k, str):
        return int.from_bytes(hashlib.sha256(k.encode("utf-8")).digest()[:4], "big")
    return int(k)


def stream_seed(master_seed: int, *keys) -> int:
    """A 64-bit seed for the stream identified by `keys`."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def substreams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(n)]


def rng_for(master_seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master_seed, *keys))


def request_seed(*parts) -> int:
    """Stable 63-bit request seed for cache keys."""
    text = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big") >> 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], parallelism: int = 1) -> list[R]:
    """Order-preserving map over a bounded thread pool."""
    items = list(items)
    if parallelism <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))
