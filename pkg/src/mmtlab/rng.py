"""Counter-based reproducible random streams and deterministic reductions.

Every Monte Carlo routine draws its randomness in fixed-size blocks; block b of
logical stream (seed, stream_id) comes from an independent Philox generator
keyed by SeedSequence(seed, spawn_key=(stream_id, b)). Results are therefore
independent of execution order and thread count. Partial results per block are
combined with a fixed pairwise tree so the floating-point summation order is
part of the contract.
"""
from __future__ import annotations

import hashlib

import numpy as np

BLOCK = 4096


def substream(seed: int, stream_id: int, block: int) -> np.random.Generator:
    """Generator for one block of one logical stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(samples: int, block: int = BLOCK) -> list[int]:
    """Sizes of the fixed blocks covering `samples` draws."""
    n_full, rem = divmod(int(samples), block)
    out = [block] * n_full
    if rem:
        out.append(rem)
    return out


def tree_sum(parts):
    """Pairwise-tree sum of a list of scalars or arrays; deterministic order."""
    arr = list(parts)
    if not arr:
        return 0.0
    while len(arr) > 1:
        nxt = [arr[i] + arr[i + 1] for i in range(0, len(arr) - 1, 2)]
        if len(arr) % 2:
            nxt.append(arr[-1])
        arr = nxt
    return arr[0]


def check_seed(master_seed: int, check_id: str) -> int:
    """Stable per-check seed derived from a master seed and a check identifier."""
    h = hashlib.sha256(check_id.encode()).digest()
    tag = int.from_bytes(h[:8], "big") % (2**63)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(tag,))
    return int(ss.generate_state(1, np.uint64)[0])


def mean_and_stderr(total: float, total_sq: float, n: int) -> tuple[float, float]:
    """Sample mean and standard error of the mean from (sum, sum of squares, count)."""
    n = int(n)
    if n <= 0:
        return 0.0, 0.0
    mean = total / n
    if n == 1:
        return float(mean), 0.0
    var = (total_sq - n * mean * mean) / (n - 1)
    var = max(var, 0.0)
    return float(mean), float(np.sqrt(var / n))
