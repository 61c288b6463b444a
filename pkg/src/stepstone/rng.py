"""Seed derivation.

Every replicate gets its own generator keyed by (master seed, stream tag,
replicate index), so results do not depend on how replicates are batched or
which worker runs them.
"""
from __future__ import annotations

import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_int(k: Key) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    if k < 0:
        raise ValueError(f"stream keys must be nonnegative, got {k}")
    return int(k)


def stream(seed: int, *key: Key) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(_key_int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` for functions that spawn replicate streams."""
    return int(rng.integers(0, 2**63 - 1))


def _run_chunk(func, args, seed, tag, indices):
    return [func(stream(seed, tag, i), *args) for i in indices]


def map_replicates(func, args: tuple, seed: int, tag: Key, replicates: int, workers: int = 1) -> list:
    """Evaluate ``func(rng_i, *args)`` for i in range(replicates), in index order.

    With ``workers > 1`` chunks go to a process pool; the output is identical
    to the serial result because each replicate owns its stream.
    """
    if workers <= 1 or replicates < 2 * workers:
        return _run_chunk(func, args, seed, tag, range(replicates))
    from concurrent.futures import ProcessPoolExecutor

    bounds = np.linspace(0, replicates, 4 * workers + 1).astype(int)
    chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_chunk, func, args, seed, tag, c) for c in chunks]
        for f in futures:
            out.extend(f.result())
    return out
