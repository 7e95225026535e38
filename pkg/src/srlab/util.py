"""Small shared helpers: RNG streams, batching, worker pool, number formatting."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def stream_rng(seed, *key):
    """Independent generator for (seed, stream id).

    Streams are derived through SeedSequence spawn keys, so any (seed, key)
    pair names the same stream on every run and on every worker layout.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def batch_sizes(total, batch_size):
    """Fixed partition of `total` replicates into batches (last may be short)."""
    total = int(total)
    batch_size = int(batch_size)
    if total <= 0:
        raise ValueError("total must be positive")
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    sizes = [batch_size] * (total // batch_size)
    if total % batch_size:
        sizes.append(total % batch_size)
    return sizes


def run_tasks(fn, n_tasks, threads=1):
    """Evaluate fn(0..n_tasks-1), returning results in task order.

    The task partition is independent of `threads`, so aggregated results are
    identical for any worker count.
    """
    if threads <= 1 or n_tasks <= 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, range(n_tasks)))


def fmt17(value):
    """Format a float with 17 significant digits (round-trip exact)."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")
