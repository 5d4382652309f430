# notebook 2- 1- streams

# ========================================================
# MARK: STEP 3 — REPRODUCIBLE RANDOM STREAMS + BATCHING
# ========================================================

from __future__ import annotations

import os
from typing import Callable, List, Tuple, TypeVar, Union

import numpy as np


# ========================================================
# STREAM TAGS (one namespace per consumer)
# ========================================================
STREAM_TAGS = {
    "data": 11,
    "prior": 23,
    "solver": 37,
    "klub": 41,
    "pool": 53,
    "monitor": 67,
}

DEFAULT_BATCH_SIZE = 8192
STREAM_BLOCK = 1024

Draw = TypeVar("Draw", np.ndarray, Tuple[np.ndarray, ...])


def stream(seed: int, tag: str, *counters: int) -> np.random.Generator:
    """
    Counter-based generator keyed on (seed, tag, *counters).

    Rules:
    - same key -> same stream, no shared state between calls
    - per-sample draws go through `blocked`, which keys on the fixed sample
      block, so batch size and worker count never change the output
    """
    if tag not in STREAM_TAGS:
        raise ValueError(f"❌ Unknown stream tag: {tag}. Use one of {sorted(STREAM_TAGS)}")
    if int(seed) != seed or seed < 0:
        raise ValueError(f"❌ Seed must be a non-negative integer, got {seed}")
    for c in counters:
        if int(c) != c or c < 0:
            raise ValueError(f"❌ Stream counters must be non-negative integers, got {counters}")

    # counter count in the key keeps (a, b) and (a, b, 0) apart
    key = [int(seed), STREAM_TAGS[tag], len(counters), *(int(c) for c in counters)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def blocked(
        seed: int,
        tag: str,
        start: int,
        stop: int,
        draw: Callable[[np.random.Generator, int], Draw],
        *counters: int,
) -> Draw:
    """
    Rows [start, stop) of a per-sample draw laid out on fixed blocks.

    Block b holds samples [b·STREAM_BLOCK, (b+1)·STREAM_BLOCK) and always comes
    from `draw(stream(seed, tag, *counters, b), STREAM_BLOCK)`; callers only
    choose which rows they take. `draw` returns one array or a tuple of
    arrays with the sample axis first.
    """
    if not 0 <= start < stop:
        raise ValueError(f"❌ Need 0 <= start < stop, got [{start}, {stop})")

    pieces: List[Union[np.ndarray, Tuple[np.ndarray, ...]]] = []
    for b in range(start // STREAM_BLOCK, (stop - 1) // STREAM_BLOCK + 1):
        lo = b * STREAM_BLOCK
        a, z = max(start, lo) - lo, min(stop, lo + STREAM_BLOCK) - lo
        full = draw(stream(seed, tag, *counters, b), STREAM_BLOCK)
        pieces.append(tuple(p[a:z] for p in full) if isinstance(full, tuple) else full[a:z])

    if isinstance(pieces[0], tuple):
        return tuple(np.concatenate(cols, axis=0) for cols in zip(*pieces))
    return np.concatenate(pieces, axis=0)


# ========================================================
# ENV-DRIVEN DEFAULTS
# ========================================================
def default_workers() -> int:
    value = int(os.getenv("AYS_WORKERS", "1"))
    if value == 0:
        raise ValueError("❌ AYS_WORKERS must be non-zero (use -1 for all cores)")
    return value


def default_batch_size() -> int:
    value = int(os.getenv("AYS_BATCH_SIZE", str(DEFAULT_BATCH_SIZE)))
    if value < 1:
        raise ValueError(f"❌ AYS_BATCH_SIZE must be positive, got {value}")
    return value


def batch_slices(n: int, batch_size: int) -> List[Tuple[int, int]]:
    """Fixed [start, stop) ranges; the last batch may be short."""
    if n < 1:
        raise ValueError(f"❌ Sample count must be positive, got {n}")
    if batch_size < 1:
        raise ValueError(f"❌ Batch size must be positive, got {batch_size}")
    return [(start, min(start + batch_size, n)) for start in range(0, n, batch_size)]
