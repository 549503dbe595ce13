"""Path-parallel execution with a fixed reduction topology.

Path indices are cut into chunks of ``CHUNK_SIZE`` consecutive indices.  The
chunk boundaries depend only on ``n_paths``; workers receive whole chunks and
the per-chunk statistics are merged by a pairwise tree in chunk order.  The
result is therefore bit-identical for every worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

CHUNK_SIZE = 512


def chunk_ranges(n_paths, chunk_size=CHUNK_SIZE):
    return [(a, min(a + chunk_size, n_paths)) for a in range(0, n_paths, chunk_size)]


@dataclass
class Moments:
    """Count, mean and centred second moment of real samples (Chan merge)."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, samples):
        samples = np.asarray(samples, dtype=float)
        mean = samples.mean(axis=0)
        m2 = ((samples - mean) ** 2).sum(axis=0)
        return cls(samples.shape[0], mean, m2)

    def merge(self, other):
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        return Moments(n, mean, m2)

    @property
    def std_error(self):
        if self.count < 2:
            return np.full_like(self.mean, np.inf)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


def complex_moments(samples):
    """Moments of complex samples, stored as stacked (real, imag) parts."""
    samples = np.asarray(samples)
    return Moments.of(np.stack([samples.real, samples.imag], axis=-1))


def complex_mean(m):
    return m.mean[..., 0] + 1j * m.mean[..., 1]


def complex_std_error(m):
    """Standard errors packed as ``re_err + 1j * im_err``."""
    se = m.std_error
    return se[..., 0] + 1j * se[..., 1]


def tree_reduce(items, combine):
    items = list(items)
    if not items:
        raise ValueError("nothing to reduce")
    while len(items) > 1:
        merged = [combine(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0]


def merge_stats(a, b):
    """Merge two dicts of Moments key by key."""
    return {k: a[k].merge(b[k]) for k in a}


def run_chunks(task, n_paths, workers=1, chunk_size=CHUNK_SIZE):
    """Evaluate ``task(start, stop)`` on every chunk, in chunk order."""
    ranges = chunk_ranges(n_paths, chunk_size)
    if workers is None or workers <= 1 or len(ranges) == 1:
        return [task(a, b) for a, b in ranges]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, [a for a, _ in ranges], [b for _, b in ranges]))


def reduce_chunks(task, n_paths, workers=1, chunk_size=CHUNK_SIZE):
    """Run ``task`` (returning a dict of Moments) and tree-merge the chunks."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    return tree_reduce(run_chunks(task, n_paths, workers, chunk_size), merge_stats)
