"""Shared plumbing: seed derivation, CSV number formatting, bounded parallelism."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from hashlib import sha256
from typing import Callable, Iterable, Sequence

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix_seed(base_seed: int, k: int) -> int:
    """Derive the k-th stream seed from a base seed.

    splitmix64 finalizer applied to base_seed + (k+1)*golden-ratio increment:
    a full-avalanche 64-bit mix, so consecutive k give statistically
    independent streams and (base, k) -> seed is reproducible everywhere.
    """
    z = (base_seed + (k + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fmt(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def config_hash(config: dict) -> str:
    """Short stable digest of a JSON-serializable config document."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return sha256(canonical.encode()).hexdigest()[:12]


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map fn over items, optionally across worker processes.

    Results keep the input order, so derived-seed reproducibility does not
    depend on the worker count.  fn must be a picklable top-level callable
    when threads > 1.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
