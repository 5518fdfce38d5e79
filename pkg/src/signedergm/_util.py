"""Seed derivation and a small thread map.

Reproducibility rule: every unit of parallel work draws from a generator
derived from (master seed, integer tags identifying the task), never from a
shared stream, so results are identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derived_rng(seed, *tags):
    """Generator keyed by the master seed and integer task tags."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


def default_threads():
    return max(1, os.cpu_count() or 1)


def thread_map(fn, items, threads=None):
    """Map fn over items, preserving order; threads<=1 runs serially."""
    items = list(items)
    n = default_threads() if threads is None else int(threads)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
