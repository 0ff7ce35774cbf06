"""Seed derivation and block-partitioned Gaussian streams.

Every batch is split into fixed-size blocks of samples. Block ``b`` of stream
``key`` always draws from its own generator seeded by ``(seed, *key, b)``, so
the result does not depend on how many workers fill the blocks or in which
order they finish.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 512


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministically derive a child 64-bit seed from ``seed`` and integer keys."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def block_rng(seed: int, key: tuple[int, ...], block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(*key, block))
    return np.random.Generator(np.random.PCG64(ss))


def block_normals(
    seed: int,
    num_samples: int,
    sample_shape: tuple[int, ...],
    key: tuple[int, ...] = (),
    threads: int = 1,
) -> np.ndarray:
    """Standard normals of shape ``(num_samples, *sample_shape)``.

    Rows ``[b*BLOCK_SIZE, (b+1)*BLOCK_SIZE)`` come from the generator of block
    ``b``; ``threads`` only changes who fills them.
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    out = np.empty((num_samples, *sample_shape))
    starts = range(0, num_samples, BLOCK_SIZE)

    def fill(start: int) -> None:
        rng = block_rng(seed, key, start // BLOCK_SIZE)
        stop = min(start + BLOCK_SIZE, num_samples)
        rng.standard_normal(out=out[start:stop])

    if threads <= 1 or num_samples <= BLOCK_SIZE:
        for start in starts:
            fill(start)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    return out
